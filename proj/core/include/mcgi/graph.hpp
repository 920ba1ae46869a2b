#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcgi/dataset.hpp"
#include "mcgi/lid.hpp"
#include "mcgi/types.hpp"

namespace mcgi {

struct BuildParams {
  std::uint32_t max_degree = 64;   // R
  std::uint32_t beam_build = 100;  // L_build
  std::uint32_t max_iter = 2;      // T; with T >= 2 the first pass runs at alpha = 1.0
  std::uint64_t seed = 0;
  // Verification mode: pruning never stops at R and reverse edges never
  // trigger re-pruning. R still sizes the random initial graph.
  bool degree_uncapped = false;
  // 1 = sequential, deterministic reference. >1 = concurrent refinement with
  // per-node atomic list replacement; 0 = OpenMP default.
  unsigned num_threads = 1;

  void validate() const;
};

// Bounded-out-degree directed graph over dataset rows.
struct Graph {
  std::size_t n = 0;
  node_id entry_point = kInvalidNode;
  std::uint32_t max_degree = 0;
  bool degree_uncapped = false;
  std::vector<std::vector<node_id>> out_neighbors;

  // Throws ParameterError on self-edges, duplicates, out-of-range ids or
  // lists longer than max_degree (capped graphs only).
  void validate() const;
  std::size_t edge_count() const;
  std::size_t max_out_degree() const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

// Row minimizing the summed L2 distance to every other row. Exact for
// count <= 100000, otherwise the medoid of a seeded 10000-row sample.
node_id find_medoid(const VectorDataset& base, std::uint64_t seed = 0);

// min(R, n-1) distinct random non-self out-neighbors per node, entry point at
// the medoid.
Graph init_random_graph(const VectorDataset& base, const BuildParams& params);

// Beam search for base[u] from the entry point; returns every expanded node
// with its squared distance to u, u itself excluded.
std::vector<Candidate> greedy_search_build(const Graph& graph, const VectorDataset& base,
                                           node_id u, std::uint32_t beam);

// Occlusion pruning with a per-node alpha. Candidates are sorted by
// (distance, id); v is dropped when an already selected n has
// alpha * d(n, v) <= d(u, v). Stops at R selections unless uncapped.
std::vector<node_id> adaptive_prune(node_id u, std::span<const Candidate> candidates,
                                    double alpha_u, std::uint32_t max_degree,
                                    const VectorDataset& base, bool uncapped = false);

// Full topology refinement. alphas.values.size() must equal base.count.
Graph build(const VectorDataset& base, const BuildParams& params,
            const MappedAlphas& alphas);

// Nodes reachable from the entry point along out-edges.
std::vector<bool> reachable_from_entry(const Graph& graph);

}  // namespace mcgi
