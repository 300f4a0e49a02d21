#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/random.hpp"
#include "spnrank/rank/dataset.hpp"
#include "spnrank/rank/pairs.hpp"
#include "spnrank/spn/inference.hpp"

namespace spnrank {

// Additive: w += rate·Δt/w. LogSpace: log w += rate·Δt, the same gradient
// taken with respect to log w, so the step no longer scales with 1/w.
enum class UpdateRule { Additive, LogSpace };

struct RankTrainConfig {
  double alpha1 = 0.01;
  double alpha2 = 0.001;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::size_t edge_budget = std::numeric_limits<std::size_t>::max();  // E0
  double prune_weight_threshold = 1e-3;
  std::size_t iterations = 10;
  double min_weight_floor = 1e-8;
  // When in (0, 1], Δn is capped at this percentile of the P1 gaps.
  double delta_n_cap_percentile = 0.0;
  std::size_t prune_eval_pairs = 1000;
  std::uint64_t seed = 0;
  // Pairs whose gradients are taken against one weight snapshot; 1 applies
  // every pair's update before the next pair is evaluated.
  std::size_t batch_size = 1;
  bool prune = true;
  UpdateRule update_rule = UpdateRule::Additive;
};

// λ1·Σ_P1 (V(h) − V(l)) − λ2·Σ_P2 |V(a) − V(b)| with V the log root value.
struct RankObjective {
  double value = 0.0;
  double p1_term = 0.0;
  double p2_term = 0.0;
  std::size_t edge_count = 0;
};

// Stand-in log value for items no MPE path can reach (score −∞), so that
// objective terms stay finite. Far below any reachable score for weights
// ≥ 1e-8 on graphs over a few thousand variables.
inline constexpr double kUnreachableLogScore = -1.0e6;

inline void require_width(const SpnGraph& graph, const AttributeVector& item) {
  if (item.bits.size() != graph.num_variables()) {
    throw DataError("item '" + item.id + "' has " + std::to_string(item.bits.size()) + " attributes, SPN has " +
                    std::to_string(graph.num_variables()));
  }
}

// log V(I): log MPN root with the item's bits as complete evidence.
inline double score(const SpnGraph& graph, const AttributeVector& item) {
  require_valid(graph);
  require_width(graph, item);
  std::vector<double> values;
  detail::log_max_values(graph, item.evidence(), values);
  return values[graph.root()];
}

inline std::vector<double> score_all(const SpnGraph& graph, const Dataset& data) {
  require_valid(graph);
  std::vector<double> out(data.size());
  std::vector<double> values;
  for (std::size_t i = 0; i < data.size(); ++i) {
    require_width(graph, data[i]);
    detail::log_max_values(graph, data[i].evidence(), values);
    out[i] = values[graph.root()];
  }
  return out;
}

enum class Ordering { First, Second, Tie };

inline const char* to_string(Ordering o) {
  switch (o) {
    case Ordering::First: return "first";
    case Ordering::Second: return "second";
    case Ordering::Tie: return "tie";
  }
  return "?";
}

inline Ordering order_scores(double a, double b) {
  if (a > b) return Ordering::First;
  if (b > a) return Ordering::Second;
  return Ordering::Tie;
}

inline Ordering rank_pair(const SpnGraph& graph, const AttributeVector& a, const AttributeVector& b) {
  return order_scores(score(graph, a), score(graph, b));
}

namespace detail {

inline double objective_score(double s) { return std::max(s, kUnreachableLogScore); }

inline RankObjective objective_from_scores(std::span<const double> scores, std::span<const ItemPair> p1,
                                           std::span<const ItemPair> p2, const RankTrainConfig& config,
                                           std::size_t edge_count) {
  RankObjective obj;
  for (const auto& p : p1) obj.p1_term += objective_score(scores[p.first]) - objective_score(scores[p.second]);
  for (const auto& p : p2) {
    obj.p2_term += std::abs(objective_score(scores[p.first]) - objective_score(scores[p.second]));
  }
  obj.value = config.lambda1 * obj.p1_term - config.lambda2 * obj.p2_term;
  obj.edge_count = edge_count;
  return obj;
}

inline std::vector<std::int64_t> delta_counts(const MpeResult& a, const MpeResult& b) {
  std::vector<std::int64_t> delta(a.traversal_counts.size());
  for (std::size_t e = 0; e < delta.size(); ++e) {
    delta[e] = static_cast<std::int64_t>(a.traversal_counts[e]) - static_cast<std::int64_t>(b.traversal_counts[e]);
  }
  return delta;
}

}  // namespace detail

inline RankObjective rank_objective(const SpnGraph& graph, const Dataset& data, const PairSets& pairs,
                                    const RankTrainConfig& config) {
  const auto scores = score_all(graph, data);
  return detail::objective_from_scores(scores, pairs.p1, pairs.p2, config, graph.edge_count());
}

// Δt_i = t_i(I_1) − t_i(I_2) per weighted edge, from the MPE traces of both
// items. Δt_i / w_i is ∂/∂w_i [log M(I_1) − log M(I_2)] away from ties.
inline std::vector<std::int64_t> pair_gradient(const Mpn& mpn, const AttributeVector& first,
                                               const AttributeVector& second) {
  require_width(mpn.graph(), first);
  require_width(mpn.graph(), second);
  const auto a = mpe_infer(mpn, first.evidence());
  const auto b = mpe_infer(mpn, second.evidence());
  return detail::delta_counts(a, b);
}

// Fraction of P1 pairs whose higher-liked item scores strictly higher.
inline double pair_accuracy(std::span<const double> scores, std::span<const ItemPair> p1) {
  if (p1.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& p : p1) correct += scores[p.first] > scores[p.second];
  return static_cast<double>(correct) / static_cast<double>(p1.size());
}

struct PruneReport {
  std::size_t candidates = 0;
  std::size_t cuts = 0;
  std::size_t edges_before = 0;
  std::size_t edges_after = 0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  std::vector<double> cut_deltas;  // objective change of each committed cut
  bool budget_met = false;         // edges_after < edge_budget
};

namespace detail {

inline std::vector<ItemPair> sample_pairs(const std::vector<ItemPair>& pairs, std::size_t n, Rng& rng) {
  if (n == 0 || pairs.size() <= n) return pairs;
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<ItemPair> out;
  for (auto i : idx) out.push_back(pairs[i]);
  return out;
}

// Edges still reachable from the root when weighted edges flagged in `cut`
// are ignored.
inline std::size_t live_edge_count(const SpnGraph& graph, const std::vector<char>& cut, std::vector<char>& seen) {
  seen.assign(graph.size(), 0);
  std::vector<NodeId> stack{graph.root()};
  seen[graph.root()] = 1;
  std::size_t edges = 0;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    const Node& n = graph.node(id);
    const std::size_t offset = n.is_sum() ? graph.edge_offset(id) : 0;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      if (n.is_sum() && cut[offset + i]) continue;
      ++edges;
      const NodeId c = n.children[i];
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
    }
  }
  return edges;
}

}  // namespace detail

// Edge pruning under the budget E0. Candidates are weighted edges below
// prune_weight_threshold, visited in ascending weight order. Each is
// tentatively zeroed and the objective re-measured on a fixed seeded
// subsample of the pairs; the cut is kept iff the objective does not
// decrease. Passes repeat until one keeps no cut or E < E0. Parentless
// nodes are deleted.
//
// Only items whose MPE trace uses the candidate edge can change score, so
// just those are re-traced per candidate.
inline SpnGraph prune(SpnGraph graph, const Dataset& data, const PairSets& pairs, const RankTrainConfig& config,
                      PruneReport* report = nullptr) {
  require_valid(graph);
  PruneReport rep;
  rep.edges_before = rep.edges_after = graph.edge_count();
  auto finish = [&](SpnGraph g) {
    rep.edges_after = g.edge_count();
    rep.budget_met = rep.edges_after < config.edge_budget;
    if (report) *report = rep;
    return g;
  };
  if (graph.edge_count() < config.edge_budget) return finish(std::move(graph));

  Rng rng(config.seed, "prune");
  const auto p1 = detail::sample_pairs(pairs.p1, config.prune_eval_pairs, rng);
  const auto p2 = detail::sample_pairs(pairs.p2, config.prune_eval_pairs, rng);

  std::vector<char> used(data.size(), 0);
  for (const auto& p : p1) used[p.first] = used[p.second] = 1;
  for (const auto& p : p2) used[p.first] = used[p.second] = 1;

  const std::size_t edges = graph.weighted_edge_count();
  std::vector<double> scores(data.size(), 0.0);
  std::vector<std::vector<std::uint32_t>> paths(data.size());  // sorted edges on each item's trace
  std::vector<std::vector<std::uint32_t>> users(edges);        // may hold stale entries
  MpeWorkspace ws;
  MpeResult r;
  auto trace = [&](std::size_t item, std::vector<std::uint32_t>& path) {
    detail::mpe_trace(graph, data[item].evidence(), ws, r);
    path.clear();
    for (std::size_t e = 0; e < edges; ++e) {
      if (r.traversal_counts[e]) path.push_back(static_cast<std::uint32_t>(e));
    }
    return r.log_root_value;
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!used[i]) continue;
    require_width(graph, data[i]);
    scores[i] = trace(i, paths[i]);
    for (auto e : paths[i]) users[e].push_back(static_cast<std::uint32_t>(i));
  }

  std::vector<char> cut(edges, 0);
  std::vector<char> alive;
  std::size_t live_edges = detail::live_edge_count(graph, cut, alive);
  auto reachable_sum = [&](NodeId id) { return alive[id] != 0; };
  double current = detail::objective_from_scores(scores, p1, p2, config, live_edges).value;
  rep.objective_before = rep.objective_after = current;

  std::vector<std::size_t> candidates;
  for (std::size_t e = 0; e < edges; ++e) {
    if (graph.weight(e) < config.prune_weight_threshold) candidates.push_back(e);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return graph.weight(a) < graph.weight(b); });
  rep.candidates = candidates.size();

  std::vector<std::uint32_t> stamp(data.size(), 0);
  std::uint32_t round = 0;
  std::vector<std::size_t> affected;
  std::vector<std::vector<std::uint32_t>> new_paths;
  std::vector<double> trial = scores;

  // Repeat passes: a cut can make an earlier rejected candidate acceptable.
  for (bool progress = true; progress && live_edges >= config.edge_budget;) {
    progress = false;
    for (std::size_t e : candidates) {
      if (live_edges < config.edge_budget) break;
      if (cut[e]) continue;
      const auto [sum_node, pos] = graph.edge_at(e);
      const Node& node = graph.node(sum_node);
      const std::size_t offset = graph.edge_offset(sum_node);
      std::size_t remaining = 0;
      for (std::size_t i = 0; i < node.children.size(); ++i) remaining += !cut[offset + i];
      if (remaining <= 1) continue;
      if (!reachable_sum(sum_node)) continue;

      const double saved = node.weights[pos];
      graph.set_weight(sum_node, pos, 0.0);

      ++round;
      affected.clear();
      for (auto item : users[e]) {
        if (stamp[item] == round) continue;
        stamp[item] = round;
        if (std::binary_search(paths[item].begin(), paths[item].end(), static_cast<std::uint32_t>(e))) {
          affected.push_back(item);
        }
      }
      new_paths.resize(affected.size());
      for (std::size_t a = 0; a < affected.size(); ++a) trial[affected[a]] = trace(affected[a], new_paths[a]);
      const double candidate = detail::objective_from_scores(trial, p1, p2, config, live_edges).value;

      if (candidate >= current) {
        cut[e] = 1;
        rep.cut_deltas.push_back(candidate - current);
        current = candidate;
        ++rep.cuts;
        for (std::size_t a = 0; a < affected.size(); ++a) {
          const auto item = affected[a];
          scores[item] = trial[item];
          paths[item] = std::move(new_paths[a]);
          for (auto pe : paths[item]) users[pe].push_back(static_cast<std::uint32_t>(item));
        }
        live_edges = detail::live_edge_count(graph, cut, alive);
        progress = true;
      } else {
        graph.set_weight(sum_node, pos, saved);
        for (auto item : affected) trial[item] = scores[item];
      }
    }
  }

  rep.objective_after = current;
  graph.remove_sum_children([&](NodeId id, std::size_t pos) { return cut[graph.edge_offset(id) + pos] != 0; });
  return finish(std::move(graph));
}

struct TrainHistoryRow {
  std::size_t iteration = 0;
  RankObjective objective;
  double train_pair_accuracy = 0.0;
};

struct TrainResult {
  SpnGraph graph;
  std::vector<TrainHistoryRow> history;
  std::vector<PruneReport> prune_reports;
};

namespace detail {

inline double delta_n_cap(const Dataset& data, const PairSets& pairs, double percentile) {
  if (!(percentile > 0.0 && percentile <= 1.0) || pairs.p1.empty()) return std::numeric_limits<double>::infinity();
  std::vector<double> gaps;
  gaps.reserve(pairs.p1.size());
  for (const auto& p : pairs.p1) gaps.push_back(static_cast<double>(data[p.first].like_count - data[p.second].like_count));
  std::sort(gaps.begin(), gaps.end());
  auto idx = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(gaps.size()))) ;
  idx = std::clamp<std::size_t>(idx, 1, gaps.size());
  return gaps[idx - 1];
}

}  // namespace detail

// Pairwise ranking training on the MPN. Per iteration, every P1 pair (h, l)
// moves each weight by α1·Δn·Δt_i/w_i and every P2 pair, oriented so that
// I_1 has the larger root value, by α2·(−Δt_i)/w_i; weights are clamped to
// min_weight_floor. Pairs involving an unreachable item (score −∞) carry no
// gradient and are skipped, as are P2 pairs with exactly equal scores. The
// iteration ends with prune() when enabled; history records the objective
// over all pairs after each iteration.
inline TrainResult train(SpnGraph graph, const Dataset& data, const PairSets& pairs, const RankTrainConfig& config) {
  require_valid(graph);
  if (config.min_weight_floor <= 0.0) throw UsageError("min_weight_floor must be positive");
  if (config.batch_size == 0) throw UsageError("batch_size must be positive");
  for (const auto& item : data) require_width(graph, item);
  TrainResult result;
  if (pairs.empty()) {
    result.graph = std::move(graph);
    return result;
  }
  const double cap = detail::delta_n_cap(data, pairs, config.delta_n_cap_percentile);

  struct Step {
    const ItemPair* pair;
    bool ordered;
  };
  std::vector<Step> schedule;
  for (const auto& p : pairs.p1) schedule.push_back({&p, true});
  for (const auto& p : pairs.p2) schedule.push_back({&p, false});

  Mpn mpn(std::move(graph));
  MpeWorkspace ws;
  MpeResult ra, rb;
  std::vector<double> pending;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    SpnGraph& g = mpn.graph();
    pending.assign(g.weighted_edge_count(), 0.0);
    std::size_t in_batch = 0;
    auto apply = [&] {
      for (std::size_t e = 0; e < pending.size(); ++e) {
        if (pending[e] == 0.0) continue;
        const auto [node, pos] = g.edge_at(e);
        const double old = g.node(node).weights[pos];
        const double w = config.update_rule == UpdateRule::Additive ? old + pending[e] : old * std::exp(pending[e]);
        if (!std::isfinite(w)) {
          throw InvariantError("non-finite weight update on edge " + std::to_string(e) + " (" +
                               std::to_string(node) + "->" + std::to_string(g.node(node).children[pos]) + ")");
        }
        g.set_weight(node, pos, std::max(w, config.min_weight_floor));
        pending[e] = 0.0;
      }
      in_batch = 0;
    };

    for (const Step& step : schedule) {
      const auto& p = *step.pair;
      detail::mpe_trace(g, data[p.first].evidence(), ws, ra);
      detail::mpe_trace(g, data[p.second].evidence(), ws, rb);
      const bool skip = ra.log_root_value == kNegInf || rb.log_root_value == kNegInf ||
                        (!step.ordered && ra.log_root_value == rb.log_root_value);
      if (!skip) {
        double rate;
        const MpeResult* one = &ra;
        const MpeResult* two = &rb;
        if (step.ordered) {
          const auto dn = static_cast<double>(data[p.first].like_count - data[p.second].like_count);
          rate = config.alpha1 * std::min(dn, cap);
        } else {
          if (rb.log_root_value > ra.log_root_value) std::swap(one, two);
          rate = -config.alpha2;
        }
        for (std::size_t e = 0; e < pending.size(); ++e) {
          const auto dt = static_cast<std::int64_t>(one->traversal_counts[e]) -
                          static_cast<std::int64_t>(two->traversal_counts[e]);
          if (dt == 0) continue;
          const double step = rate * static_cast<double>(dt);
          pending[e] += config.update_rule == UpdateRule::Additive ? step / g.weight(e) : step;
        }
      }
      if (++in_batch == config.batch_size) apply();
    }
    apply();

    if (config.prune) {
      PruneReport rep;
      SpnGraph pruned = prune(std::move(mpn).release(), data, pairs, config, &rep);
      mpn = Mpn(std::move(pruned));
      result.prune_reports.push_back(rep);
    }

    const auto scores = score_all(mpn.graph(), data);
    TrainHistoryRow row;
    row.iteration = it + 1;
    row.objective = detail::objective_from_scores(scores, pairs.p1, pairs.p2, config, mpn.graph().edge_count());
    row.train_pair_accuracy = pair_accuracy(scores, pairs.p1);
    result.history.push_back(row);
  }
  result.graph = std::move(mpn).release();
  return result;
}

}  // namespace spnrank
