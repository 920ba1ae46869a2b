#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "mcgi/types.hpp"

namespace mcgi {

// Row-major count x dim matrix of base (or query) vectors. Values are always
// held as float32; `elements` remembers the on-disk kind so the dataset can be
// written back bit-exactly.
struct VectorDataset {
  std::size_t count = 0;
  std::size_t dim = 0;
  ElementKind elements = ElementKind::float32;
  std::vector<float> values;

  VectorDataset() = default;
  VectorDataset(std::size_t dim, std::vector<float> values,
                ElementKind elements = ElementKind::float32);

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  const float* data(std::size_t i) const { return values.data() + i * dim; }
  bool empty() const { return count == 0; }

  // Throws ParameterError if the shape invariants do not hold.
  void validate() const;

  friend bool operator==(const VectorDataset&, const VectorDataset&) = default;
};

// Exact top-k answers for a query set, row q sorted by ascending distance.
struct GroundTruth {
  std::size_t query_count = 0;
  std::size_t k = 0;
  std::vector<node_id> ids;

  std::span<const node_id> row(std::size_t q) const {
    return {ids.data() + q * k, k};
  }
  void validate(std::size_t base_count) const;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

// TEXMEX layout: every record is a little-endian int32 dimension followed by
// that many elements (float32 for fvecs, uint8 for bvecs).
VectorDataset read_vecs(const std::filesystem::path& path, ElementKind elements);
void write_vecs(const VectorDataset& dataset, const std::filesystem::path& path);

// Ground truth travels as ivecs (int32 elements).
GroundTruth read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const GroundTruth& truth,
                        const std::filesystem::path& path);

// .fvecs -> float32, .bvecs -> uint8; anything else is a ParameterError.
ElementKind element_kind_for(const std::filesystem::path& path);

enum class GeneratorKind {
  uniform_ball,
  gaussian_clusters,
  embedded_manifold,
  mixed_lid,
};

GeneratorKind parse_generator_kind(std::string_view name);
std::string_view to_string(GeneratorKind kind);

struct SyntheticParams {
  GeneratorKind kind = GeneratorKind::uniform_ball;
  std::size_t n = 0;
  std::size_t ambient_dim = 0;
  std::size_t intrinsic_dim = 0;
  std::uint64_t seed = 0;
  double noise = 0.0;
  // mixed-lid only: intrinsic dimension of the first block; the second block
  // uses intrinsic_dim.
  std::size_t low_intrinsic_dim = 2;

  void validate() const;
};

// Base points drawn from the distribution described by params. A pure
// function of params.
VectorDataset generate_synthetic(const SyntheticParams& params);

// Base and query points drawn from the same distribution (same embedding,
// same cluster centers) with independent sample streams. `*_block` holds the
// mixed-lid block (0 = low, 1 = high) of each point, or the cluster index for
// gaussian-clusters, or 0 otherwise.
struct SyntheticSplit {
  VectorDataset base;
  VectorDataset queries;
  std::vector<std::uint32_t> base_block;
  std::vector<std::uint32_t> query_block;
};
SyntheticSplit generate_synthetic_split(const SyntheticParams& params,
                                        std::size_t query_count);

// Brute-force exact k nearest base vectors for each query; ties broken by
// smaller index. Parallel over queries, result independent of thread count.
GroundTruth compute_ground_truth(const VectorDataset& base,
                                 const VectorDataset& queries, std::size_t k);

}  // namespace mcgi
