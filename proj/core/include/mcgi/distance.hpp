#pragma once

#include <cstddef>

namespace mcgi {

// Squared L2 distance. Eight independent accumulators let the compiler
// vectorize without -ffast-math; the summation order depends only on dim, so
// the result is deterministic and symmetric in (a, b).
inline float l2_sq(const float* a, const float* b, std::size_t dim) noexcept {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= dim; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) {
      const float d = a[i + j] - b[i + j];
      acc[j] += d * d;
    }
  }
  float tail = 0.0f;
  for (; i < dim; ++i) {
    const float d = a[i] - b[i];
    tail += d * d;
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace mcgi
