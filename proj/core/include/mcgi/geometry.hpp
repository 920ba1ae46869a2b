#pragma once

// Brute-force geometry used as a verification oracle. Everything here works
// in double precision over all pairs and refuses inputs larger than
// kOracleMaxPoints.

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "mcgi/dataset.hpp"
#include "mcgi/graph.hpp"
#include "mcgi/types.hpp"

namespace mcgi {

inline constexpr std::size_t kOracleMaxPoints = 5000;

// Checked Euclidean distance: dimension mismatch or non-finite input throws.
double l2_distance(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  node_id id = kInvalidNode;
  double distance = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// k smallest distances, ascending, ties broken by smaller index.
std::vector<Neighbor> exact_knn(const VectorDataset& base, std::span<const float> query,
                                std::size_t k);

// Undirected edges stored canonically as (min, max).
class EdgeSet {
 public:
  using Edge = std::pair<node_id, node_id>;

  EdgeSet() = default;
  EdgeSet(std::initializer_list<Edge> edges);

  // Returns false if the edge was already present. Self-loops throw.
  bool insert(node_id u, node_id v);
  bool contains(node_id u, node_id v) const;
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  auto begin() const { return edges_.begin(); }
  auto end() const { return edges_.end(); }

  friend bool operator==(const EdgeSet&, const EdgeSet&) = default;

 private:
  std::set<Edge> edges_;
};

// Euclidean minimum spanning tree by Prim's algorithm over the full distance
// matrix; equal-weight choices go to the lexicographically smallest pair.
EdgeSet emst_edges(const VectorDataset& points);

// Relative neighborhood graph with an open lune: {u, v} is kept iff no other
// n has d(n, u) < d(u, v) and d(n, v) < d(u, v). If `boundary_ties` is given
// it receives the number of (pair, witness) triples sitting exactly on the
// lune boundary, where the strict/non-strict choice matters.
EdgeSet rng_edges(const VectorDataset& points, std::size_t* boundary_ties = nullptr);

struct InclusionReport {
  bool holds = true;
  std::vector<EdgeSet::Edge> missing;
};

// Every {u, v} of `inner` must appear as u->v or v->u in `outer`.
InclusionReport check_inclusion(const EdgeSet& inner, const Graph& outer);

// Sorted "u v" lines.
void write_edges(const EdgeSet& edges, const std::filesystem::path& path);

}  // namespace mcgi
