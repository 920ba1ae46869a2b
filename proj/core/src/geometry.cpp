#include "mcgi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "mcgi/error.hpp"

namespace mcgi {

namespace {

double dist(const VectorDataset& points, std::size_t a, std::size_t b) {
  const float* x = points.data(a);
  const float* y = points.data(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < points.dim; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

void require_oracle_size(const VectorDataset& points) {
  points.validate();
  if (points.count == 0) throw ParameterError("oracle needs at least one point");
  if (points.count > kOracleMaxPoints) {
    throw ParameterError(fmt::format(
        "geometry oracle refuses {} points (limit {})", points.count, kOracleMaxPoints));
  }
}

EdgeSet::Edge canonical(node_id u, node_id v) { return {std::min(u, v), std::max(u, v)}; }

}  // namespace

double l2_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ParameterError(
        fmt::format("dimension mismatch: {} vs {}", a.size(), b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw ParameterError(fmt::format("non-finite coordinate at index {}", i));
    }
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

std::vector<Neighbor> exact_knn(const VectorDataset& base, std::span<const float> query,
                                std::size_t k) {
  base.validate();
  if (k < 1 || k > base.count) {
    throw ParameterError(fmt::format("k = {} must lie in [1, {}]", k, base.count));
  }
  std::vector<Neighbor> all(base.count);
  for (std::size_t i = 0; i < base.count; ++i) {
    all[i] = {static_cast<node_id>(i), l2_distance(base.row(i), query)};
  }
  auto by_distance = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    by_distance);
  all.resize(k);
  return all;
}

EdgeSet::EdgeSet(std::initializer_list<Edge> edges) {
  for (auto [u, v] : edges) insert(u, v);
}

bool EdgeSet::insert(node_id u, node_id v) {
  if (u == v) throw ParameterError(fmt::format("self-loop on node {}", u));
  return edges_.insert(canonical(u, v)).second;
}

bool EdgeSet::contains(node_id u, node_id v) const {
  return u != v && edges_.count(canonical(u, v)) > 0;
}

EdgeSet emst_edges(const VectorDataset& points) {
  require_oracle_size(points);
  const std::size_t n = points.count;
  EdgeSet tree;
  if (n == 1) return tree;

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n, inf);
  std::vector<EdgeSet::Edge> best_edge(n, {kInvalidNode, kInvalidNode});
  std::vector<bool> in_tree(n, false);

  auto relax = [&](std::size_t from) {
    for (std::size_t w = 0; w < n; ++w) {
      if (in_tree[w]) continue;
      const double d = dist(points, from, w);
      const auto e = canonical(static_cast<node_id>(from), static_cast<node_id>(w));
      if (d < best[w] || (d == best[w] && e < best_edge[w])) {
        best[w] = d;
        best_edge[w] = e;
      }
    }
  };

  in_tree[0] = true;
  relax(0);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t pick = n;
    for (std::size_t w = 0; w < n; ++w) {
      if (in_tree[w]) continue;
      if (pick == n || best[w] < best[pick] ||
          (best[w] == best[pick] && best_edge[w] < best_edge[pick])) {
        pick = w;
      }
    }
    in_tree[pick] = true;
    tree.insert(best_edge[pick].first, best_edge[pick].second);
    relax(pick);
  }
  return tree;
}

EdgeSet rng_edges(const VectorDataset& points, std::size_t* boundary_ties) {
  require_oracle_size(points);
  const std::size_t n = points.count;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      d[a * n + b] = d[b * n + a] = dist(points, a, b);
    }
  }

  EdgeSet edges;
  std::size_t ties = 0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double duv = d[u * n + v];
      bool blocked = false;
      for (std::size_t w = 0; w < n; ++w) {
        if (w == u || w == v) continue;
        const double dwu = d[w * n + u];
        const double dwv = d[w * n + v];
        if (dwu < duv && dwv < duv) {
          blocked = true;
          if (!boundary_ties) break;
        } else if (dwu <= duv && dwv <= duv) {
          ++ties;
        }
      }
      if (!blocked) edges.insert(static_cast<node_id>(u), static_cast<node_id>(v));
    }
  }
  if (boundary_ties) *boundary_ties = ties;
  return edges;
}

InclusionReport check_inclusion(const EdgeSet& inner, const Graph& outer) {
  InclusionReport report;
  auto has_arc = [&](node_id from, node_id to) {
    const auto& list = outer.out_neighbors[from];
    return std::find(list.begin(), list.end(), to) != list.end();
  };
  for (auto [u, v] : inner) {
    if (u >= outer.n || v >= outer.n) {
      throw ParameterError(fmt::format(
          "edge ({}, {}) references a vertex outside the graph's {} nodes", u, v, outer.n));
    }
    if (!has_arc(u, v) && !has_arc(v, u)) report.missing.emplace_back(u, v);
  }
  report.holds = report.missing.empty();
  return report;
}

void write_edges(const EdgeSet& edges, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  for (auto [u, v] : edges) out << u << ' ' << v << '\n';
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

}  // namespace mcgi
