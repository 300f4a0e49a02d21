#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/parallel.hpp"
#include "spnrank/rank/dataset.hpp"
#include "spnrank/spn/inference.hpp"

namespace spnrank {

struct HardEmConfig {
  std::size_t iterations = 10;
  // Added to every child count before renormalising, except on the last
  // iteration, which uses raw counts so unused children reach exactly 0.
  double smoothing = 0.1;
};

struct HardEmReport {
  // Σ log MPN root over the examples: entry i is measured before iteration
  // i's update, the last entry after the final update.
  std::vector<double> log_likelihood;
  std::vector<std::size_t> node_count;
  std::size_t removed_edges = 0;
};

namespace detail {

inline double mpe_counts(const SpnGraph& graph, const Dataset& examples, std::vector<std::uint64_t>& counts) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(examples.size(), 64));
  std::vector<std::vector<std::uint64_t>> partial(chunks);
  std::vector<double> partial_ll(chunks, 0.0);
  parallel_chunks(examples.size(), chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
    MpeWorkspace ws;
    MpeResult r;
    partial[c].assign(graph.weighted_edge_count(), 0);
    for (std::size_t i = begin; i < end; ++i) {
      mpe_trace(graph, examples[i].evidence(), ws, r);
      partial_ll[c] += r.log_root_value;
      for (std::size_t e = 0; e < r.traversal_counts.size(); ++e) partial[c][e] += r.traversal_counts[e];
    }
  });
  counts.assign(graph.weighted_edge_count(), 0);
  double ll = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    if (partial[c].empty()) continue;
    for (std::size_t e = 0; e < counts.size(); ++e) counts[e] += partial[c][e];
    ll += partial_ll[c];
  }
  return ll;
}

inline double mpe_log_likelihood(const SpnGraph& graph, const Dataset& examples) {
  std::vector<std::uint64_t> unused;
  return mpe_counts(graph, examples, unused);
}

}  // namespace detail

// Hard-EM (Viterbi) refinement: each iteration traces the MPE path of every
// example, sets w_ij ∝ count_ij + smoothing per sum node, then removes sum
// children whose weight is exactly 0 together with orphaned nodes. Sum
// nodes no example reaches keep their previous weights.
inline SpnGraph hard_em_refine(SpnGraph graph, const Dataset& examples, const HardEmConfig& config,
                               HardEmReport* report = nullptr) {
  if (examples.empty()) throw DataError("hard_em_refine: empty example list");
  require_valid(graph);
  for (const auto& e : examples) {
    if (e.bits.size() != graph.num_variables()) {
      throw DataError("hard_em_refine: example '" + e.id + "' has " + std::to_string(e.bits.size()) +
                      " attributes, SPN has " + std::to_string(graph.num_variables()));
    }
  }
  if (report) *report = {};
  std::vector<std::uint64_t> counts;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double ll = detail::mpe_counts(graph, examples, counts);
    if (report) {
      report->log_likelihood.push_back(ll);
      report->node_count.push_back(graph.size());
    }
    const double smoothing = it + 1 == config.iterations ? 0.0 : config.smoothing;
    for (NodeId id = 0; id < graph.size(); ++id) {
      const Node& n = graph.node(id);
      if (!n.is_sum()) continue;
      const std::size_t offset = graph.edge_offset(id);
      double total = 0.0;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        total += static_cast<double>(counts[offset + i]) + smoothing;
      }
      if (total <= 0.0) continue;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        graph.set_weight(id, i, (static_cast<double>(counts[offset + i]) + smoothing) / total);
      }
    }
    const std::size_t removed =
        graph.remove_sum_children([&](NodeId id, std::size_t pos) { return graph.node(id).weights[pos] == 0.0; });
    if (report) report->removed_edges += removed;
  }
  if (report && config.iterations > 0) {
    report->log_likelihood.push_back(detail::mpe_log_likelihood(graph, examples));
    report->node_count.push_back(graph.size());
  }
  return graph;
}

// Items whose like count is at least the count of the ceil(fraction·n)-th
// largest item, in dataset order. Boundary ties are all kept.
inline Dataset select_top_fraction(const Dataset& data, double fraction) {
  if (data.empty()) throw DataError("select_top_fraction: empty dataset");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("fraction must be in (0, 1]");
  std::vector<std::int64_t> counts;
  counts.reserve(data.size());
  for (const auto& d : data) counts.push_back(d.like_count);
  std::sort(counts.begin(), counts.end(), std::greater<>());
  auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size()) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, data.size());
  const std::int64_t threshold = counts[keep - 1];
  Dataset out;
  for (const auto& d : data) {
    if (d.like_count >= threshold) out.push_back(d);
  }
  return out;
}

}  // namespace spnrank
