#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mcgi/dataset.hpp"
#include "mcgi/types.hpp"

namespace mcgi {

// Per-node LID estimates with their population mean and (population)
// standard deviation.
struct LidProfile {
  std::vector<float> lids;
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t k_lid = 0;

  // Fills mu and sigma from lids.
  static LidProfile from_lids(std::vector<float> lids, std::size_t k_lid);
  void validate() const;

  friend bool operator==(const LidProfile&, const LidProfile&) = default;
};

struct MappingConfig {
  double alpha_min = 1.0;
  double alpha_max = 1.5;

  // alpha_max > alpha_min >= 1.0.
  void validate() const;
};

struct MappedAlphas {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  friend bool operator==(const MappedAlphas&, const MappedAlphas&) = default;
};

// Clamp margin keeping mapped alphas strictly inside (alpha_min, alpha_max)
// once the logistic saturates in double precision.
inline constexpr double kAlphaEpsilon = 1e-12;

/// Maximum-likelihood LID from k ascending neighbor distances:
///   -( (1/k) * sum_{i=1..k} ln(r_i / r_k) )^-1
/// The i = k term is zero and is kept in the 1/k normalization.
double estimate_lid_mle(std::span<const double> sorted_distances);

struct CalibrationOptions {
  std::size_t k_lid = 32;
  // Above this many points each node's kNN is searched within a seeded
  // uniform sample of 10 * k_lid * sqrt(N) candidates instead of all points.
  std::size_t exact_limit = 100000;
  std::uint64_t sample_seed = 0;
};

struct CalibrationIssue {
  node_id node = kInvalidNode;
  std::string reason;
};

struct Calibration {
  LidProfile profile;
  // Nodes whose estimate failed; they carry the mean of the successful ones.
  std::vector<CalibrationIssue> issues;
  bool sampled = false;
};

// Estimates LID for every node from its k_lid nearest non-coincident
// neighbors. Throws DegenerateInputError when no node can be estimated.
Calibration calibrate(const VectorDataset& base, const CalibrationOptions& options);
Calibration calibrate(const VectorDataset& base, std::size_t k_lid);

double z_score(double lid, const LidProfile& profile);

/// alpha_min + (alpha_max - alpha_min) / (1 + e^z), evaluated stably and
/// clamped to [alpha_min + kAlphaEpsilon, alpha_max - kAlphaEpsilon].
double map_alpha(double z, const MappingConfig& config);

// alphas[u] = map_alpha(z_score(lids[u])). A degenerate config with
// alpha_min == alpha_max yields that constant for every node (no sigma needed).
MappedAlphas compute_alphas(const LidProfile& profile, const MappingConfig& config);

MappedAlphas uniform_alphas(std::size_t n, double alpha);

// Binary sidecar: "MCGL", u32 version, u64 N, u32 k_lid, f64 mu, f64 sigma,
// then N f32 lids; little-endian, packed.
inline constexpr std::uint32_t kProfileVersion = 1;
void save_profile(const LidProfile& profile, const std::filesystem::path& path);
LidProfile load_profile(const std::filesystem::path& path);
// "node,lid" rows.
void write_profile_csv(const LidProfile& profile, std::ostream& out);

}  // namespace mcgi
