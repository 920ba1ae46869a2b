#pragma once

// Helpers shared across translation units; not installed.

#include <cstdint>
#include <random>

namespace mcgi::detail {

// Independent deterministic stream per (seed, stream) pair.
inline std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x4d434749u};
  return std::mt19937_64(seq);
}

}  // namespace mcgi::detail
