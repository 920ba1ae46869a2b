#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcgi/dataset.hpp"
#include "mcgi/search.hpp"

namespace mcgi::cli {

struct GenOptions {
  std::string kind = "uniform-ball";
  std::size_t n = 10000;
  std::size_t dim = 64;
  std::size_t intrinsic_dim = 8;
  std::size_t intrinsic_dim_low = 2;
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::size_t queries = 100;
  std::size_t k = 10;
  std::filesystem::path out_dir = ".";
};

struct BuildOptions {
  std::filesystem::path base;
  std::filesystem::path out = "index.mcgi";
  std::uint32_t R = 64;
  std::uint32_t L_build = 100;
  double alpha_min = 1.0;
  double alpha_max = 1.5;
  std::size_t k_lid = 32;
  std::uint32_t iters = 2;
  std::uint64_t seed = 0;
  std::optional<double> fixed_alpha;
  bool uncapped = false;
  unsigned threads = 1;
  std::uint32_t block_size = 0;  // 0: smallest that fits, at least 4096
};

enum class DiskMode { memory, buffered, unbuffered };

struct SweepOptions {
  std::filesystem::path index;
  std::filesystem::path queries;
  std::filesystem::path gt;
  std::filesystem::path profile;  // empty: <index>.lid
  std::vector<std::uint32_t> L_list{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  bool adaptive = false;
  double lambda = 0.25;
  // Unset: each adaptive row uses L as beam_min. Set: every row uses it and L
  // caps the width instead.
  std::optional<std::uint32_t> beam_min;
  std::uint32_t beam_max = 400;
  std::uint32_t pilot_beam = 10;
  std::uint32_t pilot_k = 10;
  unsigned threads = 1;
  DiskMode disk_mode = DiskMode::memory;
};

struct SweepRow {
  std::uint32_t L = 0;
  double recall_at_10 = 0.0;
  double qps = 0.0;
  double mean_latency_ms = 0.0;
  double p99_latency_ms = 0.0;
  double mean_distance_evals = 0.0;
  double mean_nodes_read = 0.0;
  double mean_beam_used = 0.0;
};

struct VerifyOptions {
  std::filesystem::path base;
  std::uint32_t R = 64;
  std::uint32_t L_build = 0;  // 0: n, i.e. an exhaustive build beam
  double alpha_min = 1.0;
  double alpha_max = 1.5;
  std::size_t k_lid = 32;
  std::uint32_t iters = 2;
  std::uint64_t seed = 0;
  std::optional<std::uint32_t> capped_R;
};

struct LidStatsOptions {
  std::filesystem::path base;
  std::size_t k_lid = 32;
  std::filesystem::path csv;  // empty: stdout
};

struct RoutingOptions {
  std::vector<std::size_t> dims{2, 4, 8, 16};
  std::size_t n = 2000;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
};

// Each command writes its report to `out` and returns the process exit code.
int run_gen(const GenOptions& options, std::ostream& out);
int run_build(const BuildOptions& options, std::ostream& out);
int run_sweep(const SweepOptions& options, std::ostream& out);
int run_verify(const VerifyOptions& options, std::ostream& out);
int run_lid_stats(const LidStatsOptions& options, std::ostream& out);
int run_routing_difficulty(const RoutingOptions& options, std::ostream& out);

// Sweep core, shared with the acceptance suite. `profile` may be null for
// static sweeps.
std::vector<SweepRow> sweep(const AdjacencySource& graph, const VectorDataset& vectors,
                            const VectorDataset& queries, const GroundTruth& truth,
                            const LidProfile* profile, const SweepOptions& options);

inline constexpr const char* kSweepHeader =
    "L,recall_at_10,qps,mean_latency_ms,p99_latency_ms,mean_distance_evals,mean_nodes_read";
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

std::filesystem::path default_profile_path(const std::filesystem::path& index);

}  // namespace mcgi::cli
