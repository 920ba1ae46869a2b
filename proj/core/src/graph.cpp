#include "mcgi/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <queue>

#include <omp.h>

#include <fmt/format.h>

#include "internal.hpp"
#include "mcgi/distance.hpp"
#include "mcgi/error.hpp"
#include "mcgi/id_set.hpp"
#include "mcgi/search.hpp"

namespace mcgi {

void BuildParams::validate() const {
  if (max_degree < 1) throw ParameterError("max_degree (R) must be >= 1");
  if (beam_build < 1) throw ParameterError("beam_build (L) must be >= 1");
  if (max_iter < 1) throw ParameterError("max_iter (T) must be >= 1");
}

void Graph::validate() const {
  if (out_neighbors.size() != n) {
    throw ParameterError(fmt::format("graph has {} adjacency lists for {} nodes",
                                     out_neighbors.size(), n));
  }
  if (n > 0 && entry_point >= n) {
    throw ParameterError(fmt::format("entry point {} outside [0, {})", entry_point, n));
  }
  std::vector<node_id> sorted;
  for (std::size_t u = 0; u < n; ++u) {
    const auto& list = out_neighbors[u];
    if (!degree_uncapped && list.size() > max_degree) {
      throw ParameterError(fmt::format("node {} has degree {} > R = {}", u, list.size(), max_degree));
    }
    sorted = list;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i] >= n) {
        throw ParameterError(fmt::format("node {} links to {} outside [0, {})", u, sorted[i], n));
      }
      if (sorted[i] == u) throw ParameterError(fmt::format("node {} links to itself", u));
      if (i > 0 && sorted[i] == sorted[i - 1]) {
        throw ParameterError(fmt::format("node {} lists neighbor {} twice", u, sorted[i]));
      }
    }
  }
}

std::size_t Graph::edge_count() const {
  std::size_t total = 0;
  for (const auto& list : out_neighbors) total += list.size();
  return total;
}

std::size_t Graph::max_out_degree() const {
  std::size_t best = 0;
  for (const auto& list : out_neighbors) best = std::max(best, list.size());
  return best;
}

namespace {

constexpr std::size_t kExactMedoidLimit = 100000;
constexpr std::size_t kMedoidSample = 10000;

// Adjacency reads guarded by per-node locks so concurrent refinement only
// ever observes complete lists.
class LockedAdjacency final : public AdjacencySource {
 public:
  LockedAdjacency(const Graph& graph, std::vector<std::mutex>& locks)
      : graph_(graph), locks_(locks) {}
  std::size_t size() const override { return graph_.n; }
  node_id entry_point() const override { return graph_.entry_point; }
  void neighbors(node_id u, std::vector<node_id>& out) const override {
    std::lock_guard lock(locks_[u]);
    out = graph_.out_neighbors[u];
  }

 private:
  const Graph& graph_;
  std::vector<std::mutex>& locks_;
};

std::vector<Candidate> expanded_pool(const AdjacencySource& adjacency, const VectorDataset& base,
                                     node_id u, std::uint32_t beam) {
  BeamSearch search(adjacency, base, base.row(u), beam);
  search.run(beam);
  std::vector<Candidate> pool;
  pool.reserve(search.expanded().size());
  for (const Candidate& c : search.expanded()) {
    if (c.id != u) pool.push_back(c);
  }
  return pool;
}

}  // namespace

node_id find_medoid(const VectorDataset& base, std::uint64_t seed) {
  base.validate();
  if (base.count == 0) throw ParameterError("medoid of an empty dataset");
  std::vector<node_id> members(base.count);
  std::iota(members.begin(), members.end(), node_id{0});
  if (base.count > kExactMedoidLimit) {
    auto rng = detail::seeded_engine(seed, 0x6d6564);
    for (std::size_t i = 0; i < kMedoidSample; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, members.size() - 1);
      std::swap(members[i], members[pick(rng)]);
    }
    members.resize(kMedoidSample);
    std::sort(members.begin(), members.end());
  }
  const std::size_t m = members.size();
  const std::size_t dim = base.dim;
  std::vector<float> packed(m * dim);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(base.data(members[i]), dim, packed.data() + i * dim);
  }

  // Each unordered pair is visited once. Distances are summed as fixed-point
  // integers, so the totals do not depend on visiting order or thread count.
  double radius_sq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    radius_sq = std::max(radius_sq, static_cast<double>(l2_sq(packed.data(), packed.data() + i * dim, dim)));
  }
  const double diameter = 2.0 * std::sqrt(radius_sq) * (1.0 + 1e-6) + 1e-30;
  const double scale = std::ldexp(1.0, 62) / (diameter * static_cast<double>(m));

  // Tiles are also stored dimension-major, so one row is compared against a
  // block of lanes with unit stride and no horizontal sums.
  constexpr std::size_t kLanes = 16;
  constexpr std::size_t tile = 128;
  const std::size_t tiles = (m + tile - 1) / tile;
  std::vector<float> columns(tiles * tile * dim, 0.0f);
  for (std::size_t i = 0; i < m; ++i) {
    float* block = columns.data() + (i / tile) * tile * dim;
    for (std::size_t k = 0; k < dim; ++k) block[k * tile + i % tile] = packed[i * dim + k];
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < tiles; ++a) {
    for (std::size_t b = a; b < tiles; ++b) pairs.emplace_back(a, b);
  }
  std::vector<std::uint64_t> totals(m, 0);
  const auto pair_count = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(m, 0);
    float acc[tile];
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t t = 0; t < pair_count; ++t) {
      const auto [a, b] = pairs[static_cast<std::size_t>(t)];
      const std::size_t i1 = std::min(m, (a + 1) * tile);
      const std::size_t len = std::min(m, (b + 1) * tile) - b * tile;
      const float* block = columns.data() + b * tile * dim;
      for (std::size_t i = a * tile; i < i1; ++i) {
        const float* x = packed.data() + i * dim;
        for (std::size_t j0 = 0; j0 < tile; j0 += kLanes) {
          float lanes[kLanes] = {};
          for (std::size_t k = 0; k < dim; ++k) {
            const float xk = x[k];
            const float* col = block + k * tile + j0;
            for (std::size_t j = 0; j < kLanes; ++j) {
              const float d = col[j] - xk;
              lanes[j] += d * d;
            }
          }
          std::copy_n(lanes, kLanes, acc + j0);
        }
        const std::size_t first = a == b ? i + 1 - b * tile : 0;
        std::uint64_t row = 0;
        std::uint64_t* out = local.data() + b * tile;
        for (std::size_t j = first; j < len; ++j) {
          const auto q = static_cast<std::uint64_t>(
              static_cast<std::int64_t>(std::sqrt(static_cast<double>(acc[j])) * scale + 0.5));
          row += q;
          out[j] += q;
        }
        local[i] += row;
      }
    }
#pragma omp critical
    for (std::size_t i = 0; i < m; ++i) totals[i] += local[i];
  }
  const auto best = std::min_element(totals.begin(), totals.end()) - totals.begin();
  return members[static_cast<std::size_t>(best)];
}

Graph init_random_graph(const VectorDataset& base, const BuildParams& params) {
  params.validate();
  base.validate();
  const std::size_t n = base.count;
  if (n < 2) throw ParameterError(fmt::format("need at least 2 points to build a graph, got {}", n));

  Graph g;
  g.n = n;
  g.max_degree = params.max_degree;
  g.degree_uncapped = params.degree_uncapped;
  g.entry_point = find_medoid(base, params.seed);
  g.out_neighbors.resize(n);

  const std::size_t degree = std::min<std::size_t>(params.max_degree, n - 1);
  auto rng = detail::seeded_engine(params.seed, 1);
  std::vector<node_id> others;
  for (std::size_t u = 0; u < n; ++u) {
    auto& list = g.out_neighbors[u];
    list.reserve(degree);
    if (2 * degree > n - 1) {
      // Dense: partial Fisher-Yates over every other node.
      others.resize(n - 1);
      for (std::size_t i = 0, v = 0; v < n; ++v) {
        if (v != u) others[i++] = static_cast<node_id>(v);
      }
      for (std::size_t i = 0; i < degree; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, others.size() - 1);
        std::swap(others[i], others[pick(rng)]);
      }
      list.assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(degree));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 2);
      while (list.size() < degree) {
        std::size_t v = pick(rng);
        if (v >= u) ++v;
        const auto id = static_cast<node_id>(v);
        if (std::find(list.begin(), list.end(), id) == list.end()) list.push_back(id);
      }
    }
  }
  return g;
}

std::vector<Candidate> greedy_search_build(const Graph& graph, const VectorDataset& base,
                                           node_id u, std::uint32_t beam) {
  if (beam < 1) throw ParameterError("beam must be >= 1");
  if (u >= graph.n || base.count != graph.n) {
    throw ParameterError("graph and dataset disagree, or node outside the graph");
  }
  GraphAdjacency adjacency(graph);
  return expanded_pool(adjacency, base, u, beam);
}

std::vector<node_id> adaptive_prune(node_id u, std::span<const Candidate> candidates,
                                    double alpha_u, std::uint32_t max_degree,
                                    const VectorDataset& base, bool uncapped) {
  if (!(alpha_u >= 1.0) || !std::isfinite(alpha_u)) {
    throw ParameterError(fmt::format("alpha = {} violates alpha >= 1.0", alpha_u));
  }
  std::vector<Candidate> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  // Compared on squared distances: alpha^2 d(n,v)^2 <= d(u,v)^2.
  const double alpha_sq = alpha_u * alpha_u;
  std::vector<node_id> selected;
  node_id previous = kInvalidNode;
  for (const Candidate& v : sorted) {
    if (v.id == u) throw ParameterError(fmt::format("candidate list for node {} contains it", u));
    if (v.id == previous) continue;
    previous = v.id;
    if (!uncapped && selected.size() >= max_degree) break;
    const float* vv = base.data(v.id);
    bool occluded = false;
    for (node_id n : selected) {
      const double d_nv = l2_sq(base.data(n), vv, base.dim);
      if (alpha_sq * d_nv <= static_cast<double>(v.dist_sq)) {
        occluded = true;
        break;
      }
    }
    if (!occluded) selected.push_back(v.id);
  }
  return selected;
}

namespace {

class Refiner {
 public:
  Refiner(const VectorDataset& base, const BuildParams& params, Graph& graph)
      : base_(base), params_(params), graph_(graph), locks_(graph.n), adjacency_(graph, locks_) {}

  void refine(node_id u, const std::vector<double>& alphas) {
    std::vector<Candidate> pool = expanded_pool(adjacency_, base_, u, params_.beam_build);
    IdSet in_pool(pool.size() + params_.max_degree);
    for (const Candidate& c : pool) in_pool.insert(c.id);

    std::vector<node_id> current;
    adjacency_.neighbors(u, current);
    const float* uv = base_.data(u);
    for (node_id v : current) {
      if (v != u && in_pool.insert(v)) pool.push_back({v, l2_sq(uv, base_.data(v), base_.dim)});
    }

    std::vector<node_id> chosen = adaptive_prune(u, pool, alphas[u], params_.max_degree, base_,
                                                 params_.degree_uncapped);
    {
      std::lock_guard lock(locks_[u]);
      graph_.out_neighbors[u] = chosen;
    }
    for (node_id v : chosen) add_reverse(v, u, alphas[v]);
  }

 private:
  void add_reverse(node_id v, node_id u, double alpha_v) {
    std::lock_guard lock(locks_[v]);
    auto& list = graph_.out_neighbors[v];
    if (std::find(list.begin(), list.end(), u) != list.end()) return;
    if (params_.degree_uncapped || list.size() < params_.max_degree) {
      list.push_back(u);
      return;
    }
    std::vector<Candidate> pool;
    pool.reserve(list.size() + 1);
    const float* vv = base_.data(v);
    for (node_id w : list) pool.push_back({w, l2_sq(vv, base_.data(w), base_.dim)});
    pool.push_back({u, l2_sq(vv, base_.data(u), base_.dim)});
    list = adaptive_prune(v, pool, alpha_v, params_.max_degree, base_, false);
  }

  const VectorDataset& base_;
  const BuildParams& params_;
  Graph& graph_;
  std::vector<std::mutex> locks_;
  LockedAdjacency adjacency_;
};

}  // namespace

Graph build(const VectorDataset& base, const BuildParams& params, const MappedAlphas& alphas) {
  params.validate();
  base.validate();
  if (base.count < 2) {
    throw ParameterError(fmt::format("need at least 2 points to build a graph, got {}", base.count));
  }
  if (alphas.size() != base.count) {
    throw ParameterError(fmt::format("{} alphas for {} points", alphas.size(), base.count));
  }
  for (std::size_t u = 0; u < alphas.size(); ++u) {
    if (!(alphas[u] >= 1.0)) {
      throw ParameterError(fmt::format("alpha of node {} is {}, must be >= 1.0", u, alphas[u]));
    }
  }

  Graph graph = init_random_graph(base, params);
  std::vector<node_id> order(base.count);
  std::iota(order.begin(), order.end(), node_id{0});
  auto rng = detail::seeded_engine(params.seed, 2);
  std::shuffle(order.begin(), order.end(), rng);

  const std::vector<double> unit(base.count, 1.0);
  Refiner refiner(base, params, graph);
  const auto count = static_cast<std::int64_t>(order.size());
  for (std::uint32_t pass = 0; pass < params.max_iter; ++pass) {
    const bool warmup = params.max_iter >= 2 && pass == 0;
    const std::vector<double>& pass_alphas = warmup ? unit : alphas.values;
    if (params.num_threads == 1) {
      for (node_id u : order) refiner.refine(u, pass_alphas);
    } else {
      const int threads = params.num_threads == 0 ? omp_get_max_threads()
                                                  : static_cast<int>(params.num_threads);
#pragma omp parallel for schedule(dynamic, 64) num_threads(threads)
      for (std::int64_t i = 0; i < count; ++i) {
        refiner.refine(order[static_cast<std::size_t>(i)], pass_alphas);
      }
    }
  }
  return graph;
}

std::vector<bool> reachable_from_entry(const Graph& graph) {
  std::vector<bool> seen(graph.n, false);
  if (graph.n == 0) return seen;
  std::queue<node_id> frontier;
  frontier.push(graph.entry_point);
  seen[graph.entry_point] = true;
  while (!frontier.empty()) {
    const node_id u = frontier.front();
    frontier.pop();
    for (node_id v : graph.out_neighbors[u]) {
      if (!seen[v]) {
        seen[v] = true;
        frontier.push(v);
      }
    }
  }
  return seen;
}

}  // namespace mcgi
