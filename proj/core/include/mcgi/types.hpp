#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace mcgi {

using node_id = std::uint32_t;

inline constexpr node_id kInvalidNode = std::numeric_limits<node_id>::max();

// Element kind of the vectors as stored on disk. Everything is widened to
// float32 in memory.
enum class ElementKind : std::uint32_t { float32 = 0, uint8 = 1 };

std::string_view to_string(ElementKind kind);

// A node paired with its squared L2 distance to some reference point.
struct Candidate {
  node_id id = kInvalidNode;
  float dist_sq = 0.0f;

  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.dist_sq < b.dist_sq || (a.dist_sq == b.dist_sq && a.id < b.id);
  }
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

}  // namespace mcgi
