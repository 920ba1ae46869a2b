#include "mcgi/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "internal.hpp"
#include "mcgi/distance.hpp"
#include "mcgi/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

namespace mcgi {

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::float32: return "float32";
    case ElementKind::uint8: return "uint8";
  }
  return "unknown";
}

VectorDataset::VectorDataset(std::size_t dim_, std::vector<float> values_,
                             ElementKind elements_)
    : count(dim_ == 0 ? 0 : values_.size() / dim_),
      dim(dim_),
      elements(elements_),
      values(std::move(values_)) {
  validate();
}

void VectorDataset::validate() const {
  if (dim < 1) throw ParameterError("dataset dimension must be >= 1");
  if (values.size() != count * dim) {
    throw ParameterError(fmt::format(
        "dataset holds {} values, expected count*dim = {}*{}", values.size(),
        count, dim));
  }
}

void GroundTruth::validate(std::size_t base_count) const {
  if (k < 1) throw ParameterError("ground truth k must be >= 1");
  if (ids.size() != query_count * k) {
    throw ParameterError("ground truth id matrix has the wrong size");
  }
  for (std::size_t q = 0; q < query_count; ++q) {
    auto r = row(q);
    for (std::size_t i = 0; i < k; ++i) {
      if (r[i] >= base_count) {
        throw ParameterError(fmt::format(
            "ground truth row {} references id {} outside [0, {})", q, r[i],
            base_count));
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (r[j] == r[i]) {
          throw ParameterError(
              fmt::format("ground truth row {} repeats id {}", q, r[i]));
        }
      }
    }
  }
}

namespace {

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> bytes(size);
  in.seekg(0);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size))) {
    throw IoError(fmt::format("failed reading {}", path.string()));
  }
  return bytes;
}

void spill(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

// Walks TEXMEX records and hands each payload to `sink(index, dim, bytes)`.
// Returns (count, dim).
template <typename Sink>
std::pair<std::size_t, std::size_t> parse_records(const std::vector<char>& bytes,
                                                  std::size_t elem_size,
                                                  Sink&& sink) {
  if (bytes.empty()) throw ParseError("empty file");
  std::size_t offset = 0;
  std::size_t index = 0;
  std::int32_t first_dim = 0;
  while (offset < bytes.size()) {
    if (bytes.size() - offset < sizeof(std::int32_t)) {
      throw ParseError(fmt::format(
          "truncated file: record {} header cut off at byte offset {}", index,
          offset));
    }
    std::int32_t d = 0;
    std::memcpy(&d, bytes.data() + offset, sizeof d);
    if (d <= 0) {
      throw ParseError(fmt::format(
          "record {} at byte offset {} has non-positive dimension {}", index,
          offset, d));
    }
    if (index == 0) {
      first_dim = d;
    } else if (d != first_dim) {
      throw ParseError(fmt::format(
          "record {} has dimension {} but record 0 has dimension {}", index, d,
          first_dim));
    }
    const std::size_t payload = static_cast<std::size_t>(d) * elem_size;
    if (bytes.size() - offset - sizeof d < payload) {
      throw ParseError(fmt::format(
          "truncated file: record {} starting at byte offset {} needs {} bytes, "
          "only {} remain",
          index, offset, sizeof d + payload, bytes.size() - offset));
    }
    sink(index, static_cast<std::size_t>(d), bytes.data() + offset + sizeof d);
    offset += sizeof d + payload;
    ++index;
  }
  return {index, static_cast<std::size_t>(first_dim)};
}

std::size_t element_size(ElementKind kind) {
  return kind == ElementKind::uint8 ? 1 : 4;
}

}  // namespace

VectorDataset read_vecs(const std::filesystem::path& path, ElementKind elements) {
  const auto bytes = slurp(path);
  std::vector<float> values;
  std::size_t dim = 0;
  auto [count, d] = parse_records(
      bytes, element_size(elements),
      [&](std::size_t, std::size_t record_dim, const char* payload) {
        if (dim == 0) {
          dim = record_dim;
          values.reserve(bytes.size() / (4 + dim * element_size(elements)) * dim);
        }
        if (elements == ElementKind::uint8) {
          const auto* p = reinterpret_cast<const std::uint8_t*>(payload);
          for (std::size_t i = 0; i < dim; ++i) values.push_back(p[i]);
        } else {
          const std::size_t at = values.size();
          values.resize(at + dim);
          std::memcpy(values.data() + at, payload, dim * sizeof(float));
        }
      });
  VectorDataset out;
  out.count = count;
  out.dim = d;
  out.elements = elements;
  out.values = std::move(values);
  return out;
}

void write_vecs(const VectorDataset& dataset, const std::filesystem::path& path) {
  if (dataset.count == 0) throw ParameterError("refusing to write empty dataset");
  dataset.validate();
  const std::size_t esize = element_size(dataset.elements);
  std::vector<char> bytes(dataset.count * (sizeof(std::int32_t) + dataset.dim * esize));
  const auto d = static_cast<std::int32_t>(dataset.dim);
  char* out = bytes.data();
  for (std::size_t i = 0; i < dataset.count; ++i) {
    std::memcpy(out, &d, sizeof d);
    out += sizeof d;
    const float* row = dataset.data(i);
    if (dataset.elements == ElementKind::uint8) {
      for (std::size_t j = 0; j < dataset.dim; ++j) {
        const float v = row[j];
        if (!(v >= 0.0f && v <= 255.0f) || v != std::floor(v)) {
          throw ParameterError(fmt::format(
              "value {} at ({}, {}) is not representable as uint8", v, i, j));
        }
        *out++ = static_cast<char>(static_cast<std::uint8_t>(v));
      }
    } else {
      std::memcpy(out, row, dataset.dim * sizeof(float));
      out += dataset.dim * sizeof(float);
    }
  }
  spill(path, bytes);
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  std::vector<node_id> ids;
  std::size_t k = 0;
  auto [count, d] = parse_records(bytes, 4, [&](std::size_t index, std::size_t record_dim,
                                                 const char* payload) {
    k = record_dim;
    for (std::size_t i = 0; i < k; ++i) {
      std::int32_t v = 0;
      std::memcpy(&v, payload + i * 4, 4);
      if (v < 0) {
        throw ParseError(fmt::format("record {} holds negative id {}", index, v));
      }
      ids.push_back(static_cast<node_id>(v));
    }
  });
  GroundTruth truth;
  truth.query_count = count;
  truth.k = d;
  truth.ids = std::move(ids);
  return truth;
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  if (truth.query_count == 0) throw ParameterError("refusing to write empty ground truth");
  if (truth.ids.size() != truth.query_count * truth.k || truth.k == 0) {
    throw ParameterError("ground truth id matrix has the wrong size");
  }
  std::vector<char> bytes(truth.query_count * (truth.k + 1) * 4);
  const auto k = static_cast<std::int32_t>(truth.k);
  char* out = bytes.data();
  for (std::size_t q = 0; q < truth.query_count; ++q) {
    std::memcpy(out, &k, 4);
    out += 4;
    for (node_id id : truth.row(q)) {
      const auto v = static_cast<std::int32_t>(id);
      std::memcpy(out, &v, 4);
      out += 4;
    }
  }
  spill(path, bytes);
}

ElementKind element_kind_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".fvecs") return ElementKind::float32;
  if (ext == ".bvecs") return ElementKind::uint8;
  throw ParameterError(fmt::format(
      "cannot infer element kind of {}: expected .fvecs or .bvecs", path.string()));
}

GeneratorKind parse_generator_kind(std::string_view name) {
  if (name == "uniform-ball") return GeneratorKind::uniform_ball;
  if (name == "gaussian-clusters") return GeneratorKind::gaussian_clusters;
  if (name == "embedded-manifold") return GeneratorKind::embedded_manifold;
  if (name == "mixed-lid") return GeneratorKind::mixed_lid;
  throw ParameterError(fmt::format(
      "unknown generator kind '{}' (uniform-ball, gaussian-clusters, "
      "embedded-manifold, mixed-lid)",
      name));
}

std::string_view to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::uniform_ball: return "uniform-ball";
    case GeneratorKind::gaussian_clusters: return "gaussian-clusters";
    case GeneratorKind::embedded_manifold: return "embedded-manifold";
    case GeneratorKind::mixed_lid: return "mixed-lid";
  }
  return "unknown";
}

void SyntheticParams::validate() const {
  if (ambient_dim < 1) throw ParameterError("ambient dimension must be >= 1");
  if (intrinsic_dim < 1 || intrinsic_dim > ambient_dim) {
    throw ParameterError(fmt::format(
        "intrinsic dimension {} must lie in [1, ambient dimension {}]",
        intrinsic_dim, ambient_dim));
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw ParameterError("noise scale must be finite and non-negative");
  }
  if (kind == GeneratorKind::mixed_lid) {
    if (low_intrinsic_dim < 1 || low_intrinsic_dim > ambient_dim) {
      throw ParameterError(fmt::format(
          "low-block intrinsic dimension {} must lie in [1, {}]",
          low_intrinsic_dim, ambient_dim));
    }
    if (low_intrinsic_dim == intrinsic_dim) {
      throw ParameterError("mixed-lid blocks need different intrinsic dimensions");
    }
  }
}

namespace {

constexpr std::size_t kClusterCount = 10;

// Seeded geometry shared by the base and query streams.
struct Geometry {
  // One column-major ambient_dim x d orthonormal map per block / cluster.
  std::vector<std::vector<double>> maps;
  std::vector<std::size_t> map_dims;
  std::vector<std::vector<double>> centers;
};

std::vector<double> random_orthonormal(std::size_t rows, std::size_t cols,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> m(rows * cols);
  for (auto& v : m) v = gauss(rng);
  // Modified Gram-Schmidt on the columns.
  for (std::size_t c = 0; c < cols; ++c) {
    double* col = m.data() + c * rows;
    for (std::size_t p = 0; p < c; ++p) {
      const double* prev = m.data() + p * rows;
      double dot = 0.0;
      for (std::size_t r = 0; r < rows; ++r) dot += col[r] * prev[r];
      for (std::size_t r = 0; r < rows; ++r) col[r] -= dot * prev[r];
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < rows; ++r) norm += col[r] * col[r];
    norm = std::sqrt(norm);
    for (std::size_t r = 0; r < rows; ++r) col[r] /= norm;
  }
  return m;
}

Geometry make_geometry(const SyntheticParams& p) {
  std::mt19937_64 rng = detail::seeded_engine(p.seed, 0);
  Geometry g;
  switch (p.kind) {
    case GeneratorKind::uniform_ball:
      break;
    case GeneratorKind::embedded_manifold:
      g.maps.push_back(random_orthonormal(p.ambient_dim, p.intrinsic_dim, rng));
      g.map_dims.push_back(p.intrinsic_dim);
      break;
    case GeneratorKind::mixed_lid:
      g.maps.push_back(random_orthonormal(p.ambient_dim, p.low_intrinsic_dim, rng));
      g.map_dims.push_back(p.low_intrinsic_dim);
      g.maps.push_back(random_orthonormal(p.ambient_dim, p.intrinsic_dim, rng));
      g.map_dims.push_back(p.intrinsic_dim);
      break;
    case GeneratorKind::gaussian_clusters: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (std::size_t c = 0; c < kClusterCount; ++c) {
        std::vector<double> center(p.ambient_dim);
        for (auto& v : center) v = gauss(rng);
        g.centers.push_back(std::move(center));
        g.maps.push_back(random_orthonormal(p.ambient_dim, p.intrinsic_dim, rng));
        g.map_dims.push_back(p.intrinsic_dim);
      }
      break;
    }
  }
  return g;
}

void sample_unit_ball(std::size_t d, std::mt19937_64& rng, std::vector<double>& out) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  out.resize(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& v : out) {
      v = gauss(rng);
      norm += v * v;
    }
  } while (norm == 0.0);
  const double radius = std::pow(unif(rng), 1.0 / static_cast<double>(d));
  const double scale = radius / std::sqrt(norm);
  for (auto& v : out) v *= scale;
}

// Draws `count` points; `block_of(i)` picks the block / cluster of point i.
template <typename BlockOf>
void sample_points(const SyntheticParams& p, const Geometry& g, std::size_t count,
                   std::mt19937_64& rng, BlockOf&& block_of,
                   std::vector<float>& values, std::vector<std::uint32_t>& blocks) {
  const std::size_t D = p.ambient_dim;
  values.assign(count * D, 0.0f);
  blocks.assign(count, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> local;
  std::vector<double> point(D);
  for (std::size_t i = 0; i < count; ++i) {
    std::fill(point.begin(), point.end(), 0.0);
    const std::uint32_t block = block_of(i, rng);
    blocks[i] = block;
    switch (p.kind) {
      case GeneratorKind::uniform_ball:
        sample_unit_ball(p.intrinsic_dim, rng, local);
        std::copy(local.begin(), local.end(), point.begin());
        break;
      case GeneratorKind::embedded_manifold:
      case GeneratorKind::mixed_lid: {
        const std::size_t d = g.map_dims[block];
        sample_unit_ball(d, rng, local);
        const auto& map = g.maps[block];
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t r = 0; r < D; ++r) point[r] += map[c * D + r] * local[c];
        }
        break;
      }
      case GeneratorKind::gaussian_clusters: {
        local.resize(p.intrinsic_dim);
        for (auto& v : local) v = gauss(rng);
        const auto& map = g.maps[block];
        point = g.centers[block];
        for (std::size_t c = 0; c < p.intrinsic_dim; ++c) {
          for (std::size_t r = 0; r < D; ++r) point[r] += map[c * D + r] * local[c];
        }
        break;
      }
    }
    if (p.noise > 0.0) {
      for (auto& v : point) v += p.noise * gauss(rng);
    }
    for (std::size_t r = 0; r < D; ++r) values[i * D + r] = static_cast<float>(point[r]);
  }
}

std::pair<std::vector<float>, std::vector<std::uint32_t>> draw(
    const SyntheticParams& p, const Geometry& g, std::size_t count,
    std::uint64_t stream) {
  std::mt19937_64 rng = detail::seeded_engine(p.seed, stream);
  std::vector<float> values;
  std::vector<std::uint32_t> blocks;
  const std::size_t half = count / 2;
  sample_points(
      p, g, count, rng,
      [&](std::size_t i, std::mt19937_64& r) -> std::uint32_t {
        if (p.kind == GeneratorKind::mixed_lid) return i < half ? 0 : 1;
        if (p.kind == GeneratorKind::gaussian_clusters) {
          return static_cast<std::uint32_t>(
              std::uniform_int_distribution<std::size_t>(0, kClusterCount - 1)(r));
        }
        return 0;
      },
      values, blocks);
  return {std::move(values), std::move(blocks)};
}

}  // namespace

VectorDataset generate_synthetic(const SyntheticParams& params) {
  return generate_synthetic_split(params, 0).base;
}

SyntheticSplit generate_synthetic_split(const SyntheticParams& params,
                                        std::size_t query_count) {
  params.validate();
  const Geometry geometry = make_geometry(params);
  SyntheticSplit out;
  auto [base_values, base_blocks] = draw(params, geometry, params.n, 1);
  out.base.dim = params.ambient_dim;
  out.base.count = params.n;
  out.base.values = std::move(base_values);
  out.base_block = std::move(base_blocks);
  auto [query_values, query_blocks] = draw(params, geometry, query_count, 2);
  out.queries.dim = params.ambient_dim;
  out.queries.count = query_count;
  out.queries.values = std::move(query_values);
  out.query_block = std::move(query_blocks);
  return out;
}

GroundTruth compute_ground_truth(const VectorDataset& base,
                                 const VectorDataset& queries, std::size_t k) {
  base.validate();
  queries.validate();
  if (base.dim != queries.dim) {
    throw ParameterError(fmt::format("base dimension {} differs from query dimension {}",
                                     base.dim, queries.dim));
  }
  if (base.elements != queries.elements) {
    throw ParameterError(fmt::format("base element kind {} differs from query kind {}",
                                     to_string(base.elements),
                                     to_string(queries.elements)));
  }
  if (k < 1 || k > base.count) {
    throw ParameterError(fmt::format("k = {} must lie in [1, base count {}]", k, base.count));
  }
  GroundTruth truth;
  truth.query_count = queries.count;
  truth.k = k;
  truth.ids.resize(queries.count * k);
  const auto nq = static_cast<std::int64_t>(queries.count);
#pragma omp parallel
  {
    std::vector<Candidate> all(base.count);
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t q = 0; q < nq; ++q) {
      const float* qv = queries.data(static_cast<std::size_t>(q));
      for (std::size_t i = 0; i < base.count; ++i) {
        all[i] = {static_cast<node_id>(i), l2_sq(qv, base.data(i), base.dim)};
      }
      std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                        all.end());
      for (std::size_t j = 0; j < k; ++j) {
        truth.ids[static_cast<std::size_t>(q) * k + j] = all[j].id;
      }
    }
  }
  return truth;
}

}  // namespace mcgi
