#include "mcgi/lid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "internal.hpp"
#include "mcgi/distance.hpp"
#include "mcgi/error.hpp"

namespace mcgi {

LidProfile LidProfile::from_lids(std::vector<float> lids, std::size_t k_lid) {
  LidProfile p;
  p.k_lid = k_lid;
  p.lids = std::move(lids);
  if (p.lids.empty()) return p;
  double sum = 0.0;
  for (float v : p.lids) sum += v;
  p.mu = sum / static_cast<double>(p.lids.size());
  double sq = 0.0;
  for (float v : p.lids) {
    const double d = v - p.mu;
    sq += d * d;
  }
  p.sigma = std::sqrt(sq / static_cast<double>(p.lids.size()));
  return p;
}

void LidProfile::validate() const {
  if (lids.empty()) throw ParameterError("LID profile is empty");
  if (k_lid < 2) throw ParameterError("LID profile k_lid must be >= 2");
  for (std::size_t i = 0; i < lids.size(); ++i) {
    if (!std::isfinite(lids[i]) || !(lids[i] > 0.0f)) {
      throw ParameterError(fmt::format("LID of node {} is {}, expected finite > 0", i, lids[i]));
    }
  }
  const LidProfile fresh = from_lids(lids, k_lid);
  const double tol = 1e-9 * std::max(1.0, std::abs(fresh.mu));
  if (std::abs(fresh.mu - mu) > tol || std::abs(fresh.sigma - sigma) > tol) {
    throw ParameterError(fmt::format(
        "profile statistics (mu={}, sigma={}) disagree with its lids (mu={}, sigma={})",
        mu, sigma, fresh.mu, fresh.sigma));
  }
}

void MappingConfig::validate() const {
  if (!std::isfinite(alpha_min) || !std::isfinite(alpha_max)) {
    throw ParameterError("alpha range must be finite");
  }
  if (alpha_min < 1.0) {
    throw ParameterError(fmt::format("alpha_min = {} must be >= 1.0", alpha_min));
  }
  if (!(alpha_max > alpha_min)) {
    throw ParameterError(fmt::format(
        "alpha_max = {} must exceed alpha_min = {}", alpha_max, alpha_min));
  }
}

double estimate_lid_mle(std::span<const double> r) {
  const std::size_t k = r.size();
  if (k < 2) throw ParameterError(fmt::format("LID estimate needs k >= 2 distances, got {}", k));
  for (std::size_t i = 0; i < k; ++i) {
    if (!(r[i] > 0.0) || !std::isfinite(r[i])) {
      throw DegenerateInputError("duplicate or coincident point");
    }
    if (i > 0 && r[i] < r[i - 1]) {
      throw ParameterError("neighbor distances must be sorted ascending");
    }
  }
  const double rk = r[k - 1];
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += std::log(r[i] / rk);
  if (sum == 0.0) throw DegenerateInputError("zero-variance neighborhood");
  return -static_cast<double>(k) / sum;
}

namespace {

std::vector<node_id> calibration_sample(std::size_t n, std::size_t k_lid,
                                        std::uint64_t seed) {
  const auto want = static_cast<std::size_t>(
      10.0 * static_cast<double>(k_lid) * std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t m = std::min(n, want);
  std::vector<node_id> ids(n);
  std::iota(ids.begin(), ids.end(), node_id{0});
  auto rng = detail::seeded_engine(seed, 0x6c6964);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

Calibration calibrate(const VectorDataset& base, std::size_t k_lid) {
  CalibrationOptions options;
  options.k_lid = k_lid;
  return calibrate(base, options);
}

Calibration calibrate(const VectorDataset& base, const CalibrationOptions& options) {
  base.validate();
  const std::size_t n = base.count;
  const std::size_t k = options.k_lid;
  if (k < 2) throw ParameterError("k_lid must be >= 2");
  if (k + 1 > n) {
    throw ParameterError(fmt::format("k_lid + 1 = {} exceeds the {} points", k + 1, n));
  }

  Calibration result;
  std::vector<node_id> pool;
  if (n > options.exact_limit) {
    pool = calibration_sample(n, k, options.sample_seed);
    result.sampled = true;
  } else {
    pool.resize(n);
    std::iota(pool.begin(), pool.end(), node_id{0});
  }

  std::vector<double> lids(n, 0.0);
  std::vector<std::string> failure(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel
  {
    std::vector<Candidate> near;
    near.reserve(pool.size());
    std::vector<double> radii(k);
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t ui = 0; ui < count; ++ui) {
      const auto u = static_cast<node_id>(ui);
      near.clear();
      const float* uv = base.data(u);
      for (node_id v : pool) {
        if (v == u) continue;
        const float d = l2_sq(uv, base.data(v), base.dim);
        if (d > 0.0f) near.push_back({v, d});  // coincident neighbors are skipped
      }
      if (near.size() < k) {
        failure[u] = fmt::format("only {} non-coincident neighbors, need {}", near.size(), k);
        continue;
      }
      std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(k), near.end());
      for (std::size_t i = 0; i < k; ++i) radii[i] = std::sqrt(static_cast<double>(near[i].dist_sq));
      try {
        lids[u] = estimate_lid_mle(radii);
      } catch (const DegenerateInputError& e) {
        failure[u] = e.what();
      }
    }
  }

  double sum = 0.0;
  std::size_t ok = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (failure[u].empty()) {
      sum += lids[u];
      ++ok;
    } else {
      result.issues.push_back({static_cast<node_id>(u), std::move(failure[u])});
    }
  }
  if (ok == 0) {
    throw DegenerateInputError(fmt::format(
        "LID calibration failed for all {} nodes (first: node 0: {})", n,
        result.issues.front().reason));
  }
  const double fallback = sum / static_cast<double>(ok);
  std::vector<float> values(n);
  for (std::size_t u = 0; u < n; ++u) values[u] = static_cast<float>(lids[u]);
  for (const auto& issue : result.issues) values[issue.node] = static_cast<float>(fallback);
  result.profile = LidProfile::from_lids(std::move(values), k);
  return result;
}

double z_score(double lid, const LidProfile& profile) {
  if (!(profile.sigma > 0.0) || !std::isfinite(profile.sigma)) {
    throw DegenerateInputError("zero geometric variance");
  }
  return (lid - profile.mu) / profile.sigma;
}

double map_alpha(double z, const MappingConfig& config) {
  config.validate();
  if (!std::isfinite(z)) throw ParameterError("z-score must be finite");
  // 1 / (1 + e^z) without overflow on either tail.
  double s;
  if (z > 0.0) {
    const double e = std::exp(-z);
    s = e / (1.0 + e);
  } else {
    s = 1.0 / (1.0 + std::exp(z));
  }
  const double alpha = config.alpha_min + (config.alpha_max - config.alpha_min) * s;
  return std::clamp(alpha, config.alpha_min + kAlphaEpsilon, config.alpha_max - kAlphaEpsilon);
}

MappedAlphas compute_alphas(const LidProfile& profile, const MappingConfig& config) {
  if (config.alpha_min == config.alpha_max) {
    if (!(config.alpha_min >= 1.0) || !std::isfinite(config.alpha_min)) {
      throw ParameterError(fmt::format("alpha = {} must be >= 1.0", config.alpha_min));
    }
    return uniform_alphas(profile.lids.size(), config.alpha_min);
  }
  config.validate();
  MappedAlphas out;
  out.values.reserve(profile.lids.size());
  for (float lid : profile.lids) out.values.push_back(map_alpha(z_score(lid, profile), config));
  return out;
}

MappedAlphas uniform_alphas(std::size_t n, double alpha) {
  if (!(alpha >= 1.0) || !std::isfinite(alpha)) {
    throw ParameterError(fmt::format("alpha = {} must be >= 1.0", alpha));
  }
  return MappedAlphas{std::vector<double>(n, alpha)};
}

namespace {

constexpr char kProfileMagic[4] = {'M', 'C', 'G', 'L'};
constexpr std::size_t kProfileHeaderSize = 4 + 4 + 8 + 4 + 8 + 8;

template <typename T>
void put(std::vector<char>& out, T value) {
  const auto at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &value, sizeof(T));
}

template <typename T>
T take(const std::vector<char>& in, std::size_t& offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

}  // namespace

void save_profile(const LidProfile& profile, const std::filesystem::path& path) {
  profile.validate();
  std::vector<char> bytes;
  bytes.reserve(kProfileHeaderSize + 4 * profile.lids.size());
  bytes.insert(bytes.end(), std::begin(kProfileMagic), std::end(kProfileMagic));
  put<std::uint32_t>(bytes, kProfileVersion);
  put<std::uint64_t>(bytes, profile.lids.size());
  put<std::uint32_t>(bytes, static_cast<std::uint32_t>(profile.k_lid));
  put<double>(bytes, profile.mu);
  put<double>(bytes, profile.sigma);
  for (float v : profile.lids) put<float>(bytes, v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

LidProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::vector<char> bytes(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (bytes.size() < kProfileHeaderSize) {
    throw FormatError(fmt::format("profile truncated: {} bytes, header needs {}",
                                  bytes.size(), kProfileHeaderSize));
  }
  if (std::memcmp(bytes.data(), kProfileMagic, 4) != 0) {
    throw FormatError("not an LID profile (bad magic)");
  }
  std::size_t offset = 4;
  const auto version = take<std::uint32_t>(bytes, offset);
  if (version != kProfileVersion) {
    throw FormatError(fmt::format("unsupported LID profile version {}", version));
  }
  const auto n = take<std::uint64_t>(bytes, offset);
  const auto k_lid = take<std::uint32_t>(bytes, offset);
  const auto mu = take<double>(bytes, offset);
  const auto sigma = take<double>(bytes, offset);
  if (bytes.size() != kProfileHeaderSize + 4 * n) {
    throw FormatError(fmt::format("profile holds {} bytes, expected {} for {} nodes",
                                  bytes.size(), kProfileHeaderSize + 4 * n, n));
  }
  LidProfile p;
  p.k_lid = k_lid;
  p.mu = mu;
  p.sigma = sigma;
  p.lids.resize(n);
  std::memcpy(p.lids.data(), bytes.data() + offset, 4 * n);
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw FormatError(fmt::format("invalid LID profile {}: {}", path.string(), e.what()));
  }
  return p;
}

void write_profile_csv(const LidProfile& profile, std::ostream& out) {
  out << "node,lid\n";
  out << std::setprecision(9);
  for (std::size_t i = 0; i < profile.lids.size(); ++i) out << i << ',' << profile.lids[i] << '\n';
}

}  // namespace mcgi
