#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <omp.h>

#include "mcgi/error.hpp"
#include "mcgi/geometry.hpp"
#include "mcgi/graph.hpp"
#include "mcgi/lid.hpp"
#include "mcgi/log.hpp"
#include "mcgi/persistence.hpp"

namespace mcgi::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void print_histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins,
                     std::ostream& out) {
  if (values.empty()) return;
  if (!(hi > lo)) {
    fmt::print(out, "  [{:.4f}] {}\n", lo, values.size());
    return;
  }
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::ptrdiff_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  const std::size_t peak = *std::max_element(counts.begin(), counts.end());
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const auto bar = peak ? counts[b] * 40 / peak : 0;
    fmt::print(out, "  [{:.4f}, {:.4f}) {:>8} {}\n", lo + width * static_cast<double>(b),
               lo + width * static_cast<double>(b + 1), counts[b], std::string(bar, '#'));
  }
}

// Alphas for a dataset: calibrated and mapped, or the midpoint when the
// geometry is degenerate. `profile` is left empty when calibration failed.
MappedAlphas calibrated_alphas(const VectorDataset& base, std::size_t k_lid,
                               const MappingConfig& mapping, std::optional<LidProfile>& profile) {
  const double midpoint = 0.5 * (mapping.alpha_min + mapping.alpha_max);
  try {
    auto calibration = calibrate(base, k_lid);
    if (!calibration.issues.empty()) {
      warn(fmt::format("{} nodes had too few distinct neighbors and carry the mean LID",
                       calibration.issues.size()));
    }
    profile = std::move(calibration.profile);
  } catch (const DegenerateInputError& e) {
    warn(fmt::format("calibration failed ({}); using uniform alpha = {}", e.what(), midpoint));
    return uniform_alphas(base.count, midpoint);
  }
  try {
    return compute_alphas(*profile, mapping);
  } catch (const DegenerateInputError& e) {
    warn(fmt::format("{}; using uniform alpha = {}", e.what(), midpoint));
    return uniform_alphas(base.count, midpoint);
  }
}

std::uint32_t pick_block_size(std::uint32_t requested, std::size_t dim, std::size_t slots) {
  if (requested != 0) return requested;
  return std::max(kDefaultBlockSize, required_block_size(dim, slots));
}

constexpr std::size_t kVerifyMaxPoints = 500;

}  // namespace

std::filesystem::path default_profile_path(const std::filesystem::path& index) {
  auto p = index;
  p += ".lid";
  return p;
}

int run_gen(const GenOptions& o, std::ostream& out) {
  SyntheticParams params;
  params.kind = parse_generator_kind(o.kind);
  params.n = o.n;
  params.ambient_dim = o.dim;
  params.intrinsic_dim = o.intrinsic_dim;
  params.low_intrinsic_dim = o.intrinsic_dim_low;
  params.seed = o.seed;
  params.noise = o.noise;
  params.validate();
  if (o.queries == 0) throw ParameterError("--queries must be >= 1");
  if (o.k == 0 || o.k > o.n) throw ParameterError(fmt::format("--k must be in [1, {}]", o.n));

  const auto split = generate_synthetic_split(params, o.queries);
  const auto truth = compute_ground_truth(split.base, split.queries, o.k);
  std::filesystem::create_directories(o.out_dir);
  write_vecs(split.base, o.out_dir / "base.fvecs");
  write_vecs(split.queries, o.out_dir / "query.fvecs");
  write_ground_truth(truth, o.out_dir / "gt.ivecs");
  fmt::print(out, "generated {} base and {} query vectors ({}, D={}, d={}) in {}\n", o.n,
             o.queries, o.kind, o.dim, o.intrinsic_dim, o.out_dir.string());
  return 0;
}

int run_build(const BuildOptions& o, std::ostream& out) {
  MappingConfig mapping{o.alpha_min, o.alpha_max};
  if (o.fixed_alpha) {
    if (!(*o.fixed_alpha >= 1.0) || !std::isfinite(*o.fixed_alpha)) {
      throw ParameterError("--fixed-alpha must be finite and >= 1.0");
    }
  } else {
    mapping.validate();
  }
  BuildParams params;
  params.max_degree = o.R;
  params.beam_build = o.L_build;
  params.max_iter = o.iters;
  params.seed = o.seed;
  params.degree_uncapped = o.uncapped;
  params.num_threads = o.threads;
  params.validate();

  const auto base = read_vecs(o.base, element_kind_for(o.base));
  const auto start = Clock::now();

  std::optional<LidProfile> profile;
  MappedAlphas alphas = calibrated_alphas(base, o.k_lid, mapping, profile);
  if (o.fixed_alpha) alphas = uniform_alphas(base.count, *o.fixed_alpha);
  const double calibrate_seconds = seconds_since(start);

  const auto graph = build(base, params, alphas);
  const double build_seconds = seconds_since(start);

  const auto slots = o.uncapped ? std::max<std::size_t>(graph.max_out_degree(), 1) : o.R;
  const auto block = pick_block_size(o.block_size, base.dim, slots);
  save_index(graph, base, alphas, o.out, block);
  const auto profile_path = default_profile_path(o.out);
  if (profile) save_profile(*profile, profile_path);

  fmt::print(out, "build report\n");
  fmt::print(out, "  points          {} x {}\n", base.count, base.dim);
  fmt::print(out, "  R / L_build / T {} / {} / {}{}\n", o.R, o.L_build, o.iters,
             o.uncapped ? " (uncapped)" : "");
  if (profile) {
    fmt::print(out, "  {:<10} {:>14} {:>15}\n", "dataset", "mu_LID (Mean)", "sigma_LID (Std)");
    fmt::print(out, "  {:<10} {:>14.1f} {:>15.1f}\n", o.base.stem().string(), profile->mu,
               profile->sigma);
    fmt::print(out, "  k_lid           {}\n", profile->k_lid);
  } else {
    fmt::print(out, "  LID profile     unavailable (degenerate geometry)\n");
  }
  if (o.fixed_alpha) {
    fmt::print(out, "  alpha           fixed at {}\n", *o.fixed_alpha);
  } else {
    fmt::print(out, "  alpha range     [{}, {}]\n", mapping.alpha_min, mapping.alpha_max);
    print_histogram(alphas.values, mapping.alpha_min, mapping.alpha_max, 10, out);
  }
  fmt::print(out, "  edges           {} (max out-degree {})\n", graph.edge_count(),
             graph.max_out_degree());
  fmt::print(out, "  entry point     {}\n", graph.entry_point);
  fmt::print(out, "  calibration     {:.3f} s\n", calibrate_seconds);
  fmt::print(out, "  build time      {:.3f} s\n", build_seconds);
  fmt::print(out, "  index           {} (block size {})\n", o.out.string(), block);
  if (profile) fmt::print(out, "  profile         {}\n", profile_path.string());
  return 0;
}

std::vector<SweepRow> sweep(const AdjacencySource& graph, const VectorDataset& vectors,
                            const VectorDataset& queries, const GroundTruth& truth,
                            const LidProfile* profile, const SweepOptions& o) {
  constexpr std::uint32_t k = 10;
  if (o.L_list.empty()) throw ParameterError("empty L list");
  if (queries.empty()) throw ParameterError("no queries");
  if (truth.query_count != queries.count) {
    throw ParameterError(fmt::format("ground truth has {} rows for {} queries", truth.query_count,
                                     queries.count));
  }
  if (truth.k < k) throw ParameterError(fmt::format("ground truth depth {} < 10", truth.k));
  if (queries.dim != vectors.dim) {
    throw ParameterError(fmt::format("query dimension {} differs from index dimension {}",
                                     queries.dim, vectors.dim));
  }
  if (o.adaptive && profile == nullptr) {
    warn("adaptive sweep without an LID profile; rows fall back to static search");
  }

  const auto nq = static_cast<std::ptrdiff_t>(queries.count);
  const int threads = o.threads == 0 ? omp_get_max_threads() : static_cast<int>(o.threads);

  auto params_for = [&](std::uint32_t L) {
    SearchParams p;
    p.k = k;
    p.beam = L;
    if (o.adaptive) {
      p.adaptive = true;
      p.lambda = o.lambda;
      if (o.beam_min) {
        p.beam_min = *o.beam_min;
        p.beam_max = L;
      } else {
        p.beam_min = L;
        p.beam_max = std::max(o.beam_max, L);
      }
      p.pilot_beam = o.pilot_beam;
      p.pilot_k = o.pilot_k;
    }
    p.validate();
    return p;
  };
  auto one = [&](const SearchParams& p, std::size_t q) {
    return p.adaptive ? adaptive_beam_search(graph, vectors, queries.row(q), p, profile)
                      : beam_search(graph, vectors, queries.row(q), p.beam, p.k);
  };

  for (auto L : o.L_list) {
    if (L < k) throw ParameterError(fmt::format("L = {} is below the recall depth 10", L));
  }

  {
    const auto warm = params_for(o.L_list.front());
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
    for (std::ptrdiff_t q = 0; q < nq; ++q) (void)one(warm, static_cast<std::size_t>(q));
  }

  std::vector<SweepRow> rows;
  std::vector<double> latency(queries.count), recall(queries.count), evals(queries.count),
      reads(queries.count), beams(queries.count);
  for (auto L : o.L_list) {
    const auto p = params_for(L);
    const auto start = Clock::now();
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
    for (std::ptrdiff_t qi = 0; qi < nq; ++qi) {
      const auto q = static_cast<std::size_t>(qi);
      const auto t0 = Clock::now();
      const auto r = one(p, q);
      latency[q] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      recall[q] = recall_at_k(r, truth.row(q), k);
      evals[q] = static_cast<double>(r.stats.distance_evals);
      reads[q] = static_cast<double>(r.stats.nodes_read);
      beams[q] = static_cast<double>(r.stats.beam_used);
    }
    const double wall = seconds_since(start);
    const auto mean = [&](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    SweepRow row;
    row.L = L;
    row.recall_at_10 = mean(recall);
    row.qps = static_cast<double>(queries.count) / wall;
    row.mean_latency_ms = mean(latency);
    auto sorted = latency;
    const auto rank = static_cast<std::size_t>(
        std::ceil(0.99 * static_cast<double>(sorted.size()))) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank),
                     sorted.end());
    row.p99_latency_ms = sorted[rank];
    row.mean_distance_evals = mean(evals);
    row.mean_nodes_read = mean(reads);
    row.mean_beam_used = mean(beams);
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    fmt::print(out, "{},{:.4f},{:.1f},{:.4f},{:.4f},{:.1f},{:.1f}\n", r.L, r.recall_at_10, r.qps,
               r.mean_latency_ms, r.p99_latency_ms, r.mean_distance_evals, r.mean_nodes_read);
  }
}

int run_sweep(const SweepOptions& o, std::ostream& out) {
  if (o.gt.empty() || !std::filesystem::exists(o.gt)) {
    throw IoError(fmt::format("ground truth file '{}' not found", o.gt.string()));
  }
  const auto queries = read_vecs(o.queries, element_kind_for(o.queries));
  const auto truth = read_ground_truth(o.gt);

  std::optional<LidProfile> profile;
  if (o.adaptive) {
    const auto path = o.profile.empty() ? default_profile_path(o.index) : o.profile;
    if (std::filesystem::exists(path)) {
      profile = load_profile(path);
    }
  }
  const LidProfile* p = profile ? &*profile : nullptr;

  std::vector<SweepRow> rows;
  if (o.disk_mode == DiskMode::memory) {
    const auto index = load_index(o.index);
    truth.validate(index.base.count);
    rows = sweep(GraphAdjacency(index.graph), index.base, queries, truth, p, o);
  } else {
    DiskIndex disk(o.index, o.disk_mode == DiskMode::unbuffered ? ReadMode::unbuffered
                                                                : ReadMode::buffered);
    truth.validate(disk.size());
    rows = sweep(disk, disk.vectors(), queries, truth, p, o);
  }
  write_sweep_csv(rows, out);
  return 0;
}

int run_verify(const VerifyOptions& o, std::ostream& out) {
  const auto base = read_vecs(o.base, element_kind_for(o.base));
  if (base.count > kVerifyMaxPoints) {
    throw ParameterError(fmt::format("verify is limited to {} points (geometry oracle); got {}",
                                     kVerifyMaxPoints, base.count));
  }
  fmt::print(out, "verify {} points, dim {}\n", base.count, base.dim);
  if (base.count <= 1) {
    fmt::print(out, "emst_inclusion PASS (no edges)\nrng_inclusion PASS (no edges)\n"
                    "reachability PASS ({}/{})\n",
               base.count, base.count);
    return 0;
  }

  const MappingConfig mapping{o.alpha_min, o.alpha_max};
  mapping.validate();
  std::optional<LidProfile> profile;
  const std::size_t k_lid = std::min(o.k_lid, base.count - 1);
  const MappedAlphas alphas =
      k_lid >= 2 ? calibrated_alphas(base, k_lid, mapping, profile)
                 : uniform_alphas(base.count, 0.5 * (o.alpha_min + o.alpha_max));

  BuildParams params;
  params.max_degree = o.R;
  params.beam_build = o.L_build == 0 ? static_cast<std::uint32_t>(base.count) : o.L_build;
  params.max_iter = o.iters;
  params.seed = o.seed;
  params.degree_uncapped = true;
  params.validate();
  const auto graph = build(base, params, alphas);

  const auto emst = emst_edges(base);
  std::size_t ties = 0;
  const auto rng = rng_edges(base, &ties);
  bool ok = true;
  auto report = [&](const char* name, const EdgeSet& edges, const InclusionReport& r) {
    if (r.holds) {
      fmt::print(out, "{} PASS ({} edges)\n", name, edges.size());
      return;
    }
    ok = false;
    fmt::print(out, "{} FAIL ({} of {} edges missing)\n", name, r.missing.size(), edges.size());
    for (const auto& [u, v] : r.missing) fmt::print(out, "  missing {} {}\n", u, v);
  };
  report("emst_inclusion", emst, check_inclusion(emst, graph));
  report("rng_inclusion", rng, check_inclusion(rng, graph));
  if (ties > 0) fmt::print(out, "  note: {} lune-boundary ties\n", ties);

  const auto reached = reachable_from_entry(graph);
  const auto count = static_cast<std::size_t>(std::count(reached.begin(), reached.end(), true));
  if (count == base.count) {
    fmt::print(out, "reachability PASS ({}/{})\n", count, base.count);
  } else {
    ok = false;
    fmt::print(out, "reachability FAIL ({}/{})\n", count, base.count);
    for (std::size_t u = 0; u < reached.size(); ++u) {
      if (!reached[u]) fmt::print(out, "  unreachable {}\n", u);
    }
  }

  if (o.capped_R) {
    auto capped = params;
    capped.degree_uncapped = false;
    capped.max_degree = *o.capped_R;
    const auto g = build(base, capped, alphas);
    const auto r = check_inclusion(emst, g);
    fmt::print(out, "capped R={} emst_inclusion: {} of {} edges missing (degree-cap caveat)\n",
               *o.capped_R, r.missing.size(), emst.size());
    for (const auto& [u, v] : r.missing) fmt::print(out, "  missing {} {}\n", u, v);
  }
  fmt::print(out, "overall {}\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int run_lid_stats(const LidStatsOptions& o, std::ostream& out) {
  const auto base = read_vecs(o.base, element_kind_for(o.base));
  const auto calibration = calibrate(base, o.k_lid);
  const auto& profile = calibration.profile;
  if (o.csv.empty()) {
    write_profile_csv(profile, out);
  } else {
    std::ofstream csv(o.csv);
    if (!csv) throw IoError(fmt::format("cannot open {} for writing", o.csv.string()));
    write_profile_csv(profile, csv);
  }
  if (profile.sigma == 0.0) {
    warn("sigma_LID is 0: zero geometric variance, the alpha mapping is degenerate");
  }
  std::ostream& summary = o.csv.empty() ? std::cerr : out;
  const auto [lo, hi] = std::minmax_element(profile.lids.begin(), profile.lids.end());
  fmt::print(summary, "N {}  k_lid {}  mu_LID {:.1f}  sigma_LID {:.1f}  min {:.2f}  max {:.2f}\n",
             profile.lids.size(), profile.k_lid, profile.mu, profile.sigma, *lo, *hi);
  if (!calibration.issues.empty()) {
    fmt::print(summary, "{} nodes assigned the mean (too few distinct neighbors)\n",
               calibration.issues.size());
  }
  std::vector<double> values(profile.lids.begin(), profile.lids.end());
  print_histogram(values, *lo, *hi, 10, summary);
  return 0;
}

int run_routing_difficulty(const RoutingOptions& o, std::ostream& out) {
  RoutingConfig config;
  config.dims = o.dims;
  config.n = o.n;
  config.trials = o.trials;
  config.seed = o.seed;
  const auto rows = routing_difficulty_experiment(config);
  out << "dim,success_rate,mean_distance_evals,mean_hops\n";
  bool trend = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    fmt::print(out, "{},{:.4f},{:.2f},{:.2f}\n", r.dim, r.success_rate, r.mean_distance_evals,
               r.mean_hops);
    if (i > 0 && (r.success_rate > rows[i - 1].success_rate ||
                  r.mean_distance_evals < rows[i - 1].mean_distance_evals)) {
      trend = false;
    }
  }
  if (!trend) {
    std::cerr << "routing trend not monotone in dimension\n";
    return 1;
  }
  return 0;
}

}  // namespace mcgi::cli
