#include "mcgi/search.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mcgi/distance.hpp"
#include "mcgi/error.hpp"
#include "mcgi/log.hpp"

namespace mcgi {

void SearchParams::validate() const {
  if (k < 1) throw ParameterError("k must be >= 1");
  if (beam < 1) throw ParameterError("beam must be >= 1");
  if (!adaptive) {
    if (k > beam) throw ParameterError(fmt::format("k = {} exceeds beam = {}", k, beam));
    return;
  }
  if (beam_min < 1 || beam_min > beam_max) {
    throw ParameterError(fmt::format("need 1 <= beam_min ({}) <= beam_max ({})", beam_min, beam_max));
  }
  if (k > beam_max) {
    throw ParameterError(fmt::format("k = {} exceeds beam_max = {}", k, beam_max));
  }
  if (pilot_k < 2) throw ParameterError("pilot_k must be >= 2");
  if (pilot_beam < pilot_k) {
    throw ParameterError(fmt::format("pilot_beam = {} must be >= pilot_k = {}", pilot_beam, pilot_k));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("lambda must be finite and non-negative");
  }
}

BeamSearch::BeamSearch(const AdjacencySource& graph, const VectorDataset& vectors,
                       std::span<const float> query, std::size_t max_beam)
    : graph_(graph), vectors_(vectors), query_(query), max_beam_(max_beam) {
  if (graph.size() == 0) throw ParameterError("cannot search an empty graph");
  if (max_beam < 1) throw ParameterError("max_beam must be >= 1");
  if (query.size() != vectors.dim) {
    throw ParameterError(fmt::format("query dimension {} differs from index dimension {}",
                                     query.size(), vectors.dim));
  }
}

void BeamSearch::consider(node_id id) {
  if (!seen_.insert(id)) return;
  score(id);
}

void BeamSearch::score(node_id id) {
  const Candidate c{id, l2_sq(query_.data(), vectors_.data(id), vectors_.dim)};
  ++stats_.distance_evals;
  // Entries past the active width are kept up to max_beam_: they can never
  // re-enter the top `capacity_` of this run, but a later, wider run needs them.
  if (list_.size() >= max_beam_ && !(c < list_.back().candidate)) return;
  auto pos = std::lower_bound(list_.begin(), list_.end(), c,
                              [](const Entry& e, const Candidate& x) { return e.candidate < x; });
  const auto index = static_cast<std::size_t>(pos - list_.begin());
  list_.insert(pos, Entry{c, false});
  if (list_.size() > max_beam_) list_.pop_back();
  cursor_ = std::min(cursor_, index);
}

void BeamSearch::run(std::size_t beam) {
  if (beam < 1) throw ParameterError("beam must be >= 1");
  if (beam > max_beam_) {
    throw ParameterError(fmt::format("beam {} exceeds this search's max_beam {}", beam, max_beam_));
  }
  if (beam <= capacity_) return;
  capacity_ = beam;
  if (seen_.empty()) consider(graph_.entry_point());
  for (;;) {
    const std::size_t active = std::min(list_.size(), capacity_);
    while (cursor_ < active && list_[cursor_].expanded) ++cursor_;
    if (cursor_ >= active) break;
    Entry& next = list_[cursor_];
    next.expanded = true;
    const Candidate current = next.candidate;
    expanded_.push_back(current);
    ++stats_.hops;
    graph_.neighbors(current.id, scratch_);
    ++stats_.nodes_read;
    // Unseen neighbors are collected first so their vectors can be fetched
    // ahead of the distance computations.
    std::size_t fresh = 0;
    for (node_id nb : scratch_) {
      if (seen_.insert(nb)) scratch_[fresh++] = nb;
    }
    const std::size_t row_bytes = vectors_.dim * sizeof(float);
    const auto prefetch = [&](node_id id) {
      const char* row = reinterpret_cast<const char*>(vectors_.data(id));
      for (std::size_t off = 0; off < row_bytes; off += 64) __builtin_prefetch(row + off);
    };
    constexpr std::size_t kAhead = 4;
    for (std::size_t i = 0; i < std::min(fresh, kAhead); ++i) prefetch(scratch_[i]);
    for (std::size_t i = 0; i < fresh; ++i) {
      if (i + kAhead < fresh) prefetch(scratch_[i + kAhead]);
      score(scratch_[i]);
    }
  }
}

SearchResult BeamSearch::result(std::size_t k) const {
  SearchResult out;
  const std::size_t take = std::min(k, list_.size());
  out.ids.reserve(take);
  out.distances.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.ids.push_back(list_[i].candidate.id);
    out.distances.push_back(std::sqrt(list_[i].candidate.dist_sq));
  }
  out.stats = stats_;
  out.stats.beam_used = static_cast<std::uint32_t>(capacity_);
  return out;
}

SearchResult beam_search(const AdjacencySource& graph, const VectorDataset& vectors,
                         std::span<const float> query, std::uint32_t beam, std::uint32_t k) {
  if (k < 1) throw ParameterError("k must be >= 1");
  if (k > beam) throw ParameterError(fmt::format("k = {} exceeds beam = {}", k, beam));
  BeamSearch search(graph, vectors, query, beam);
  search.run(beam);
  return search.result(k);
}

std::optional<double> estimate_query_lid(std::span<const float> pilot_distances,
                                         std::size_t pilot_k) {
  if (pilot_k < 2) throw ParameterError("pilot_k must be >= 2");
  if (pilot_distances.size() < pilot_k) {
    throw ParameterError(fmt::format("pilot returned {} distances, need {}",
                                     pilot_distances.size(), pilot_k));
  }
  std::vector<double> r(pilot_distances.begin(),
                        pilot_distances.begin() + static_cast<std::ptrdiff_t>(pilot_k));
  if (std::any_of(r.begin(), r.end(), [](double d) { return d <= 0.0; })) return std::nullopt;
  return estimate_lid_mle(r);
}

std::uint32_t adaptive_beam_width(double query_lid, double mu, const SearchParams& params) {
  const double raw = std::round(static_cast<double>(params.beam_min) *
                                std::exp(params.lambda * (query_lid - mu)));
  const double clamped = std::clamp(raw, static_cast<double>(params.beam_min),
                                    static_cast<double>(params.beam_max));
  return static_cast<std::uint32_t>(clamped);
}

SearchResult adaptive_beam_search(const AdjacencySource& graph, const VectorDataset& vectors,
                                  std::span<const float> query, const SearchParams& params,
                                  const LidProfile* profile) {
  if (profile == nullptr) {
    warn("adaptive search without an LID profile; falling back to a static beam");
    SearchParams fixed = params;
    fixed.adaptive = false;
    fixed.validate();
    return beam_search(graph, vectors, query, params.beam, params.k);
  }
  params.validate();

  BeamSearch search(graph, vectors, query,
                    std::max({params.beam_max, params.pilot_beam, params.k}));
  search.run(params.pilot_beam);
  const SearchResult pilot = search.result(params.pilot_k);

  std::uint32_t width = params.beam_max;
  if (pilot.distances.size() >= params.pilot_k) {
    try {
      const auto lid = estimate_query_lid(pilot.distances, params.pilot_k);
      if (!lid) {
        // Exact hit: stop here unless the pilot list cannot supply k ids.
        width = params.beam_min;
        if (params.pilot_beam >= params.k) {
          SearchResult out = search.result(params.k);
          out.stats.beam_used = width;
          return out;
        }
      } else {
        width = adaptive_beam_width(*lid, profile->mu, params);
      }
    } catch (const DegenerateInputError&) {
      // Equidistant pilot neighbors: treat as maximally complex.
      width = params.beam_max;
    }
  }
  search.run(std::max(width, params.k));
  SearchResult out = search.result(params.k);
  out.stats.beam_used = width;
  return out;
}

double recall_at_k(const SearchResult& result, std::span<const node_id> truth, std::size_t k) {
  if (k < 1) throw ParameterError("k must be >= 1");
  if (k > result.ids.size() || k > truth.size()) {
    throw ParameterError(fmt::format("recall@{} needs {} result and truth ids (have {} and {})",
                                     k, k, result.ids.size(), truth.size()));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (std::find(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(k), result.ids[i]) !=
        truth.begin() + static_cast<std::ptrdiff_t>(k)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

}  // namespace mcgi
