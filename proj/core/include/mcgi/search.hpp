#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "mcgi/dataset.hpp"
#include "mcgi/graph.hpp"
#include "mcgi/id_set.hpp"
#include "mcgi/lid.hpp"
#include "mcgi/types.hpp"

namespace mcgi {

// Where beam search gets adjacency from. One neighbors() call is one node
// read (one block for disk-resident indices).
class AdjacencySource {
 public:
  virtual ~AdjacencySource() = default;
  virtual std::size_t size() const = 0;
  virtual node_id entry_point() const = 0;
  // Replaces `out` with the out-neighbors of u.
  virtual void neighbors(node_id u, std::vector<node_id>& out) const = 0;
};

class GraphAdjacency final : public AdjacencySource {
 public:
  explicit GraphAdjacency(const Graph& graph) : graph_(graph) {}
  std::size_t size() const override { return graph_.n; }
  node_id entry_point() const override { return graph_.entry_point; }
  void neighbors(node_id u, std::vector<node_id>& out) const override {
    out = graph_.out_neighbors[u];
  }

 private:
  const Graph& graph_;
};

struct SearchStats {
  std::uint64_t distance_evals = 0;
  std::uint64_t hops = 0;        // expansions
  std::uint64_t nodes_read = 0;  // neighbors() calls
  std::uint32_t beam_used = 0;
};

struct SearchResult {
  std::vector<node_id> ids;
  std::vector<float> distances;  // L2, ascending
  SearchStats stats;
};

struct SearchParams {
  std::uint32_t beam = 10;
  std::uint32_t k = 10;
  bool adaptive = false;
  double lambda = 0.25;
  std::uint32_t beam_min = 10;
  std::uint32_t beam_max = 400;
  std::uint32_t pilot_beam = 10;
  std::uint32_t pilot_k = 10;

  void validate() const;
};

// Best-first search over a candidate list of bounded width. The state
// survives between run() calls so a narrow search can be widened in place.
class BeamSearch {
 public:
  // `max_beam` bounds every later run(); candidates ranked beyond it are
  // dropped.
  BeamSearch(const AdjacencySource& graph, const VectorDataset& vectors,
             std::span<const float> query,
             std::size_t max_beam = std::numeric_limits<std::size_t>::max());

  // Expands the closest unexpanded candidate until every candidate in the
  // top-`beam` list is expanded. A beam narrower than a previous run is a
  // no-op.
  void run(std::size_t beam);

  // The k closest candidates found so far.
  SearchResult result(std::size_t k) const;
  // Expanded nodes in expansion order, with squared distances.
  const std::vector<Candidate>& expanded() const { return expanded_; }
  const SearchStats& stats() const { return stats_; }

 private:
  struct Entry {
    Candidate candidate;
    bool expanded = false;
  };

  void consider(node_id id);
  void score(node_id id);

  const AdjacencySource& graph_;
  const VectorDataset& vectors_;
  std::span<const float> query_;
  std::vector<Entry> list_;
  std::size_t max_beam_;
  std::size_t capacity_ = 0;
  std::size_t cursor_ = 0;
  IdSet seen_{256};
  std::vector<Candidate> expanded_;
  std::vector<node_id> scratch_;
  SearchStats stats_;
};

SearchResult beam_search(const AdjacencySource& graph, const VectorDataset& vectors,
                         std::span<const float> query, std::uint32_t beam, std::uint32_t k);

// LID of the query from its pilot_k smallest pilot distances (ascending L2).
// std::nullopt signals an exact hit (a zero distance), where LID is undefined.
std::optional<double> estimate_query_lid(std::span<const float> pilot_distances,
                                         std::size_t pilot_k);

// Beam width L(q) = clamp(round(beam_min * exp(lambda * (lid - mu))),
// beam_min, beam_max).
std::uint32_t adaptive_beam_width(double query_lid, double mu, const SearchParams& params);

// Pilot search at pilot_beam, in-situ LID estimate, then the same search
// widened to L(q). Without a profile this warns and runs a static search at
// params.beam.
SearchResult adaptive_beam_search(const AdjacencySource& graph, const VectorDataset& vectors,
                                  std::span<const float> query, const SearchParams& params,
                                  const LidProfile* profile);

// |result[0..k) intersect truth[0..k)| / k.
double recall_at_k(const SearchResult& result, std::span<const node_id> truth, std::size_t k);

struct RoutingConfig {
  std::vector<std::size_t> dims{2, 4, 8, 16};
  std::size_t n = 2000;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  std::size_t ambient_dim = 0;  // 0: the largest entry of dims
  std::uint32_t max_degree = 32;
  std::uint32_t beam_build = 64;
  std::size_t k_lid = 20;
};

struct RoutingRow {
  std::size_t dim = 0;
  double success_rate = 0.0;
  double mean_distance_evals = 0.0;
  double mean_hops = 0.0;
};

// For every intrinsic dimension: uniform-ball data, a full index build, then
// pure greedy routing (beam 1) toward fresh random targets. Success means the
// route ends at the target's true nearest neighbor.
std::vector<RoutingRow> routing_difficulty_experiment(const RoutingConfig& config);

}  // namespace mcgi
