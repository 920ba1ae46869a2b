#include <algorithm>

#include <fmt/format.h>

#include "mcgi/error.hpp"
#include "mcgi/graph.hpp"
#include "mcgi/lid.hpp"
#include "mcgi/log.hpp"
#include "mcgi/search.hpp"

namespace mcgi {

std::vector<RoutingRow> routing_difficulty_experiment(const RoutingConfig& config) {
  if (config.dims.empty()) throw ParameterError("routing experiment needs at least one dimension");
  if (config.trials < 1) throw ParameterError("routing experiment needs at least one trial");
  const std::size_t ambient =
      config.ambient_dim != 0 ? config.ambient_dim
                              : *std::max_element(config.dims.begin(), config.dims.end());

  std::vector<RoutingRow> rows;
  for (std::size_t d : config.dims) {
    if (d < 1 || d > ambient) {
      throw ParameterError(fmt::format("intrinsic dimension {} outside [1, {}]", d, ambient));
    }
    SyntheticParams data;
    data.kind = GeneratorKind::uniform_ball;
    data.n = config.n;
    data.ambient_dim = ambient;
    data.intrinsic_dim = d;
    data.seed = config.seed;
    const SyntheticSplit split = generate_synthetic_split(data, config.trials);

    MappedAlphas alphas;
    try {
      const Calibration cal = calibrate(split.base, config.k_lid);
      alphas = compute_alphas(cal.profile, MappingConfig{});
    } catch (const DegenerateInputError& e) {
      warn(fmt::format("d={}: {}; using uniform alpha 1.25", d, e.what()));
      alphas = uniform_alphas(split.base.count, 1.25);
    }
    BuildParams params;
    params.max_degree = config.max_degree;
    params.beam_build = config.beam_build;
    params.seed = config.seed;
    const Graph graph = build(split.base, params, alphas);
    const GroundTruth truth = compute_ground_truth(split.base, split.queries, 1);

    GraphAdjacency adjacency(graph);
    std::size_t successes = 0;
    double evals = 0.0;
    double hops = 0.0;
    for (std::size_t q = 0; q < split.queries.count; ++q) {
      const SearchResult r = beam_search(adjacency, split.base, split.queries.row(q), 1, 1);
      if (r.ids.front() == truth.row(q)[0]) ++successes;
      evals += static_cast<double>(r.stats.distance_evals);
      hops += static_cast<double>(r.stats.hops);
    }
    const auto trials = static_cast<double>(split.queries.count);
    rows.push_back({d, static_cast<double>(successes) / trials, evals / trials, hops / trials});
  }
  return rows;
}

}  // namespace mcgi
