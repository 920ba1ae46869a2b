// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include <fmt/core.h>

#include "mcgi/dataset.hpp"
#include "mcgi/geometry.hpp"
#include "mcgi/graph.hpp"
#include "mcgi/lid.hpp"
#include "mcgi/log.hpp"
#include "mcgi/persistence.hpp"
#include "mcgi/search.hpp"

namespace {

using namespace mcgi;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class ScratchDir {
 public:
  ScratchDir() {
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("mcgi_acceptance_{}", static_cast<long>(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

// Shared 10K SIFT-like workload (criteria 7 and 10).
struct SiftLike {
  SyntheticSplit split;
  GroundTruth truth;
  Graph graph;
  MappedAlphas alphas;
};

SyntheticParams sift_like_params(std::size_t n) {
  SyntheticParams p;
  p.kind = GeneratorKind::gaussian_clusters;
  p.n = n;
  p.ambient_dim = 128;
  p.intrinsic_dim = 16;
  p.seed = 7;
  return p;
}

BuildParams table_build_params() {
  BuildParams b;
  b.max_degree = 64;
  b.beam_build = 100;
  b.max_iter = 2;
  b.seed = 0;
  return b;
}

const SiftLike& sift_like() {
  static const SiftLike s = [] {
    SiftLike x;
    x.split = generate_synthetic_split(sift_like_params(10000), 200);
    x.truth = compute_ground_truth(x.split.base, x.split.queries, 10);
    x.alphas = compute_alphas(calibrate(x.split.base, 32).profile, MappingConfig{});
    x.graph = build(x.split.base, table_build_params(), x.alphas);
    return x;
  }();
  return s;
}

Outcome mapping_fixed_point() {
  const double a = map_alpha(0.0, MappingConfig{1.0, 1.5});
  return {a == 1.25, fmt::format("map_alpha(0) = {:.17g}", a)};
}

Outcome monotone_bounded() {
  std::mt19937_64 rng(20251018);
  std::uniform_real_distribution<double> mu_dist(1.0, 40.0), sigma_dist(0.05, 10.0);
  std::uniform_real_distribution<double> z_dist(-12.0, 12.0);
  std::uniform_real_distribution<double> lo_dist(1.0, 2.0), width_dist(0.01, 1.0);
  std::size_t draws = 0, order_failures = 0, bound_failures = 0, skipped = 0;
  for (; draws < 1000000; ++draws) {
    const double mu = mu_dist(rng), sigma = sigma_dist(rng);
    LidProfile profile;
    profile.mu = mu;
    profile.sigma = sigma;
    const double lo = lo_dist(rng);
    const MappingConfig cfg{lo, lo + width_dist(rng)};
    double l1 = mu + sigma * z_dist(rng), l2 = mu + sigma * z_dist(rng);
    if (l1 > l2) std::swap(l1, l2);
    const double a1 = map_alpha(z_score(l1, profile), cfg);
    const double a2 = map_alpha(z_score(l2, profile), cfg);
    for (double a : {a1, a2}) bound_failures += !(a > cfg.alpha_min && a < cfg.alpha_max);
    // Pairs closer than 1e-6 in z can round to the same double.
    if ((l2 - l1) / sigma < 1e-6) {
      ++skipped;
      continue;
    }
    order_failures += !(a1 > a2);
  }
  // Saturated tails stay strictly inside the range after the clamp.
  for (double z : {-1e6, -750.0, -40.0, 40.0, 750.0, 1e6}) {
    const double a = map_alpha(z, MappingConfig{1.0, 1.5});
    bound_failures += !(a > 1.0 && a < 1.5);
  }
  return {order_failures == 0 && bound_failures == 0,
          fmt::format("{} draws, {} order violations, {} bound violations, {} near-ties skipped",
                      draws, order_failures, bound_failures, skipped)};
}

Outcome estimator_consistency() {
  bool ok = true;
  std::string detail;
  for (std::size_t d : {2, 4, 8}) {
    SyntheticParams p;
    p.kind = GeneratorKind::uniform_ball;
    p.n = 5000;
    p.ambient_dim = 64;
    p.intrinsic_dim = d;
    p.seed = 1;
    const double mu = calibrate(generate_synthetic(p), 50).profile.mu;
    const bool within = std::abs(mu - static_cast<double>(d)) <= 0.2 * static_cast<double>(d);
    ok = ok && within;
    detail += fmt::format("{}d={} mean={:.3f}", detail.empty() ? "" : ", ", d, mu);
  }
  return {ok, detail};
}

Outcome degeneration_equivalence() {
  std::size_t matches = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticParams p;
    p.kind = GeneratorKind::uniform_ball;
    p.n = 2000;
    p.ambient_dim = 32;
    p.intrinsic_dim = 8;
    p.seed = seed;
    const auto base = generate_synthetic(p);
    BuildParams b;
    b.max_degree = 32;
    b.beam_build = 64;
    b.seed = seed;
    const auto profile = calibrate(base, 16).profile;
    const auto degenerate = build(base, b, compute_alphas(profile, MappingConfig{1.2, 1.2}));
    const auto fixed = build(base, b, uniform_alphas(base.count, 1.2));
    matches += degenerate == fixed;
  }
  return {matches == 20, fmt::format("{}/20 seeds adjacency-identical", matches)};
}

Outcome connectivity_inclusion() {
  std::size_t passed = 0, missing_total = 0, unreachable_total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SyntheticParams p;
    p.kind = GeneratorKind::uniform_ball;
    p.n = 200;
    p.ambient_dim = 16;
    p.intrinsic_dim = 2 + seed % 7;
    p.seed = seed;
    const auto base = generate_synthetic(p);
    BuildParams b;
    b.max_degree = 16;
    b.beam_build = 200;
    b.seed = seed;
    b.degree_uncapped = true;
    const auto graph =
        build(base, b, compute_alphas(calibrate(base, 16).profile, MappingConfig{}));
    const auto inclusion = check_inclusion(emst_edges(base), graph);
    const auto reached = reachable_from_entry(graph);
    const auto unreachable =
        static_cast<std::size_t>(std::count(reached.begin(), reached.end(), false));
    missing_total += inclusion.missing.size();
    unreachable_total += unreachable;
    passed += inclusion.holds && unreachable == 0;
  }
  return {passed == 50, fmt::format("{}/50 seeds, {} EMST edges missing, {} unreachable nodes",
                                    passed, missing_total, unreachable_total)};
}

Outcome oracle_search_equivalence() {
  std::size_t exact = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const std::size_t n = 25 * (seed + 1);  // 25..100
    SyntheticParams p;
    p.kind = GeneratorKind::uniform_ball;
    p.n = n;
    p.ambient_dim = 8;
    p.intrinsic_dim = 8;
    p.seed = seed;
    const auto split = generate_synthetic_split(p, 25);
    Graph g;
    g.n = n;
    g.entry_point = static_cast<node_id>(seed);
    g.max_degree = static_cast<std::uint32_t>(n);
    g.out_neighbors.resize(n);
    for (node_id u = 0; u < n; ++u) {
      for (node_id v = 0; v < n; ++v) {
        if (u != v) g.out_neighbors[u].push_back(v);
      }
    }
    for (std::size_t q = 0; q < split.queries.count; ++q) {
      const auto r = beam_search(GraphAdjacency(g), split.base, split.queries.row(q),
                                 static_cast<std::uint32_t>(n), 10);
      const auto truth = exact_knn(split.base, split.queries.row(q), 10);
      bool same = r.ids.size() == truth.size();
      for (std::size_t i = 0; same && i < truth.size(); ++i) same = r.ids[i] == truth[i].id;
      exact += same;
      ++total;
    }
  }
  return {exact == total && total == 100, fmt::format("{}/{} queries exact", exact, total)};
}

Outcome recall_sweep() {
  const auto& s = sift_like();
  GraphAdjacency adjacency(s.graph);
  std::string curve;
  double best = 0.0, last = -1.0;
  bool monotone = true;
  std::uint32_t reached_at = 0;
  for (std::uint32_t L = 10; L <= 100; L += 10) {
    double sum = 0.0;
    for (std::size_t q = 0; q < s.split.queries.count; ++q) {
      sum += recall_at_k(beam_search(adjacency, s.split.base, s.split.queries.row(q), L, 10),
                         s.truth.row(q), 10);
    }
    const double recall = sum / static_cast<double>(s.split.queries.count);
    monotone = monotone && recall >= last;
    last = recall;
    best = std::max(best, recall);
    if (reached_at == 0 && recall >= 0.95) reached_at = L;
    curve += fmt::format("{}{}:{:.4f}", curve.empty() ? "" : " ", L, recall);
  }
  return {monotone && best >= 0.95,
          fmt::format("recall@10 {} (>=0.95 first at L={}, monotone {})", curve, reached_at,
                      monotone ? "yes" : "no")};
}

struct ModeStats {
  double recall = 0.0;
  double nodes_read = 0.0;
  double beam_used[2] = {0.0, 0.0};
};

Outcome adaptive_direction() {
  SyntheticParams p;
  p.kind = GeneratorKind::mixed_lid;
  p.n = 10000;
  p.ambient_dim = 64;
  p.intrinsic_dim = 12;
  p.low_intrinsic_dim = 2;
  p.seed = 3;
  const auto split = generate_synthetic_split(p, 200);
  const auto truth = compute_ground_truth(split.base, split.queries, 10);
  const auto profile = calibrate(split.base, 32).profile;
  const auto graph = build(split.base, table_build_params(), compute_alphas(profile, MappingConfig{}));
  GraphAdjacency adjacency(graph);
  const double nq = static_cast<double>(split.queries.count);

  auto run = [&](const std::function<SearchResult(std::span<const float>)>& search) {
    ModeStats m;
    double count[2] = {0.0, 0.0};
    for (std::size_t q = 0; q < split.queries.count; ++q) {
      const auto r = search(split.queries.row(q));
      m.recall += recall_at_k(r, truth.row(q), 10) / nq;
      m.nodes_read += static_cast<double>(r.stats.nodes_read) / nq;
      m.beam_used[split.query_block[q]] += r.stats.beam_used;
      count[split.query_block[q]] += 1.0;
    }
    for (int b = 0; b < 2; ++b) m.beam_used[b] /= std::max(count[b], 1.0);
    return m;
  };

  SearchParams params;
  params.adaptive = true;
  params.lambda = 0.25;
  params.beam_min = 10;
  params.beam_max = 25;
  const auto adaptive = run([&](std::span<const float> q) {
    return adaptive_beam_search(adjacency, split.base, q, params, &profile);
  });

  // Cheapest static beam whose recall matches the adaptive recall to 0.5%.
  std::uint32_t matched_L = 0;
  ModeStats matched;
  for (std::uint32_t L = 10; L <= 100 && matched_L == 0; ++L) {
    const auto s = run([&](std::span<const float> q) {
      return beam_search(adjacency, split.base, q, L, 10);
    });
    if (s.recall >= adaptive.recall - 0.005) {
      matched_L = L;
      matched = s;
    }
  }
  const bool direction = adaptive.beam_used[1] > adaptive.beam_used[0];
  const bool matched_ok = matched_L != 0 && std::abs(matched.recall - adaptive.recall) <= 0.005;
  const bool cheaper = matched_ok && adaptive.nodes_read <= matched.nodes_read;
  return {direction && matched_ok && cheaper,
          fmt::format("beam_used low={:.2f} high={:.2f}; adaptive recall {:.4f} reads {:.2f}; "
                      "static L={} recall {:.4f} reads {:.2f}",
                      adaptive.beam_used[0], adaptive.beam_used[1], adaptive.recall,
                      adaptive.nodes_read, matched_L, matched.recall, matched.nodes_read)};
}

Outcome routing_trend() {
  RoutingConfig c;
  c.dims = {2, 4, 8, 16};
  c.n = 2000;
  c.trials = 200;
  const auto rows = routing_difficulty_experiment(c);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      ok = ok && rows[i].success_rate <= rows[i - 1].success_rate;
      ok = ok && rows[i].mean_distance_evals >= rows[i - 1].mean_distance_evals;
    }
    detail += fmt::format("{}d={} success={:.3f} evals={:.1f}", i ? ", " : "", rows[i].dim,
                          rows[i].success_rate, rows[i].mean_distance_evals);
  }
  return {ok, detail};
}

Outcome persistence_fidelity() {
  const auto& s = sift_like();
  ScratchDir dir;
  const auto first = dir / "a.mcgi", second = dir / "b.mcgi";
  save_index(s.graph, s.split.base, s.alphas, first);
  const auto loaded = load_index(first);
  save_index(loaded.graph, loaded.base, loaded.alphas, second, loaded.header.block_size);
  const bool exact = loaded.graph == s.graph && loaded.base == s.split.base &&
                     loaded.alphas == s.alphas && file_bytes(first) == file_bytes(second);

  std::size_t same = 0, compared = 0;
  bool direct = false;
  for (auto mode : {ReadMode::buffered, ReadMode::unbuffered}) {
    DiskIndex disk(first, mode);
    direct = direct || disk.unbuffered();
    for (std::size_t q = 0; q < 100; ++q) {
      const auto mem = beam_search(GraphAdjacency(s.graph), s.split.base, s.split.queries.row(q), 50, 10);
      const auto dsk = beam_search(disk, disk.vectors(), s.split.queries.row(q), 50, 10);
      same += mem.ids == dsk.ids;
      ++compared;
    }
  }
  return {exact && same == compared,
          fmt::format("round trip {}, disk ids identical {}/{} (O_DIRECT {})",
                      exact ? "bit-exact" : "DIFFERS", same, compared,
                      direct ? "on" : "unavailable, buffered")};
}

// Graph build (medoid, random init, refinement) on the default generator,
// best of three interleaved runs per size. LID calibration is timed
// separately: its exact kNN is quadratic by design at this scale.
Outcome scaling() {
  SyntheticParams p;
  p.kind = GeneratorKind::uniform_ball;
  p.ambient_dim = 64;
  p.intrinsic_dim = 8;
  p.seed = 7;
  struct Size {
    VectorDataset base;
    MappedAlphas alphas;
    double calibration = 0.0;
    double best = std::numeric_limits<double>::infinity();
  };
  Size sizes[2];
  for (int s = 0; s < 2; ++s) {
    p.n = s == 0 ? 10000 : 20000;
    sizes[s].base = generate_synthetic(p);
    const auto start = Clock::now();
    sizes[s].alphas = compute_alphas(calibrate(sizes[s].base, 32).profile, MappingConfig{});
    sizes[s].calibration = seconds_since(start);
  }
  for (int rep = 0; rep < 3; ++rep) {
    for (auto& s : sizes) {
      const auto start = Clock::now();
      const auto graph = build(s.base, table_build_params(), s.alphas);
      s.best = std::min(s.best, seconds_since(start));
    }
  }
  const double ratio = sizes[1].best / sizes[0].best;
  return {ratio >= 1.6 && ratio <= 2.8,
          fmt::format("build 10K {:.2f} s, 20K {:.2f} s, ratio {:.3f} (calibration {:.2f} s, "
                      "{:.2f} s)",
                      sizes[0].best, sizes[1].best, ratio, sizes[0].calibration,
                      sizes[1].calibration)};
}

}  // namespace

// Optional arguments select criteria by number; none runs all of them.
int main(int argc, char** argv) {
  // Expected fallbacks (e.g. O_DIRECT refused) are noted in the detail text.
  mcgi::set_warning_sink([](std::string_view) {});
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"mapping fixed point", mapping_fixed_point},
      {"monotone and bounded mapping", monotone_bounded},
      {"estimator consistency", estimator_consistency},
      {"degenerate range equals fixed alpha", degeneration_equivalence},
      {"connectivity inclusion", connectivity_inclusion},
      {"oracle search equivalence", oracle_search_equivalence},
      {"recall sweep", recall_sweep},
      {"adaptive budget direction", adaptive_direction},
      {"routing difficulty trend", routing_trend},
      {"persistence fidelity", persistence_fidelity},
      {"build scaling", scaling},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const auto n = static_cast<std::size_t>(std::strtoul(argv[a], nullptr, 10));
    if (n < 1 || n > criteria.size()) {
      fmt::print(stderr, "no criterion {}\n", argv[a]);
      return 2;
    }
    selected[n - 1] = true;
  }
  int failures = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++ran;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failures += !o.pass;
    fmt::print("criterion {:>2} {} {} [{:.1f} s] {}\n", i + 1, o.pass ? "PASS" : "FAIL",
               criteria[i].first, seconds_since(start), o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
