#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace mcgi {

// Warnings that must never be silent (fallbacks, degenerate statistics).
// They go to stderr unless a sink is installed.
using WarningSink = std::function<void(std::string_view)>;

// Returns the previous sink; pass nullptr to restore stderr.
WarningSink set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace mcgi
