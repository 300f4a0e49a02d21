#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls the inference code it is used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "spnrank/random.hpp"
#include "spnrank/spn/evidence.hpp"
#include "spnrank/spn/graph.hpp"

namespace spnrank::testing {

// The two-variable network of the worked example:
//   0.8·(0.2x1 + 0.8x̄1)(0.4x2 + 0.6x̄2) + 0.2·(0.7x1 + 0.3x̄1)(0.1x2 + 0.9x̄2)
// Node ids: 0..3 indicators x1, x̄1, x2, x̄2; 4..7 mixtures; 8, 9 products;
// 10 root.
inline SpnGraph two_var_spn() {
  std::vector<Node> n;
  n.push_back(Node::leaf(0, Polarity::Positive));
  n.push_back(Node::leaf(0, Polarity::Negative));
  n.push_back(Node::leaf(1, Polarity::Positive));
  n.push_back(Node::leaf(1, Polarity::Negative));
  n.push_back(Node::sum({0, 1}, {0.2, 0.8}));
  n.push_back(Node::sum({2, 3}, {0.4, 0.6}));
  n.push_back(Node::sum({0, 1}, {0.7, 0.3}));
  n.push_back(Node::sum({2, 3}, {0.1, 0.9}));
  n.push_back(Node::product({4, 5}));
  n.push_back(Node::product({6, 7}));
  n.push_back(Node::sum({8, 9}, {0.8, 0.2}));
  return SpnGraph(std::move(n), 10, 2);
}

// Random complete and decomposable SPN over `num_variables` variables.
// Indicator leaves are shared, and previously built nodes with a matching
// scope are sometimes reused, so the result is a DAG rather than a tree.
class RandomSpn {
 public:
  RandomSpn(std::uint64_t seed, std::size_t max_nodes = 200) : rng_(seed), max_nodes_(max_nodes) {}

  SpnGraph build(std::size_t num_variables, bool normalized = true) {
    nodes_.clear();
    by_scope_.clear();
    normalized_ = normalized;
    for (std::uint32_t v = 0; v < num_variables; ++v) {
      nodes_.push_back(Node::leaf(v, Polarity::Positive));
      nodes_.push_back(Node::leaf(v, Polarity::Negative));
    }
    std::vector<std::uint32_t> all(num_variables);
    for (std::uint32_t v = 0; v < num_variables; ++v) all[v] = v;
    NodeId root = make(all, 0, true);
    SpnGraph g(nodes_, root, num_variables);
    g.compact();
    return g;
  }

 private:
  NodeId add(Node n, const std::vector<std::uint32_t>& scope) {
    nodes_.push_back(std::move(n));
    const auto id = static_cast<NodeId>(nodes_.size() - 1);
    by_scope_[scope].push_back(id);
    return id;
  }

  std::vector<double> weights(std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& x : w) total += (x = rng_.uniform(0.05, 1.0));
    if (normalized_) {
      for (auto& x : w) x /= total;
    }
    return w;
  }

  bool budget_left() const { return nodes_.size() + 8 < max_nodes_; }

  NodeId make(const std::vector<std::uint32_t>& scope, int depth, bool force_sum = false) {
    if (!force_sum && depth > 0) {
      auto it = by_scope_.find(scope);
      if (it != by_scope_.end() && rng_.uniform() < 0.3) return it->second[rng_.below(it->second.size())];
    }
    if (scope.size() == 1) {
      const std::uint32_t v = scope.front();
      if (!force_sum && rng_.uniform() < 0.25) return 2 * v + rng_.below(2);
      return add(Node::sum({2 * v, 2 * v + 1}, weights(2)), scope);
    }
    const bool sum = force_sum || (depth < 6 && budget_left() && rng_.uniform() < 0.5);
    if (sum) {
      const std::size_t k = budget_left() ? 2 + rng_.below(2) : 1;
      std::vector<NodeId> children;
      for (std::size_t i = 0; i < k; ++i) children.push_back(make_product(scope, depth + 1));
      return add(Node::sum(children, weights(children.size())), scope);
    }
    return make_product(scope, depth + 1);
  }

  NodeId make_product(const std::vector<std::uint32_t>& scope, int depth) {
    std::vector<std::uint32_t> shuffled = scope;
    rng_.shuffle(std::span(shuffled));
    const std::size_t parts = std::min<std::size_t>(scope.size(), 2 + rng_.below(2));
    std::vector<std::vector<std::uint32_t>> split(parts);
    for (std::size_t i = 0; i < shuffled.size(); ++i) split[i < parts ? i : rng_.below(parts)].push_back(shuffled[i]);
    std::vector<NodeId> children;
    for (auto& s : split) {
      std::sort(s.begin(), s.end());
      children.push_back(make(s, depth));
    }
    return add(Node::product(children), scope);
  }

  Rng rng_;
  std::size_t max_nodes_;
  bool normalized_ = true;
  std::vector<Node> nodes_;
  std::map<std::vector<std::uint32_t>, std::vector<NodeId>> by_scope_;
};

// Naive recursive node value for a complete state (no memoisation, no log
// space). `max_semantics` turns sums into max over weight × child.
inline double naive_value(const SpnGraph& g, NodeId id, const std::vector<std::uint8_t>& state, bool max_semantics) {
  const Node& n = g.node(id);
  if (n.is_leaf()) return (state[n.var] != 0) == (n.polarity == Polarity::Positive) ? 1.0 : 0.0;
  if (n.is_product()) {
    double p = 1.0;
    for (NodeId c : n.children) p *= naive_value(g, c, state, max_semantics);
    return p;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    const double v = n.weights[i] * naive_value(g, n.children[i], state, max_semantics);
    acc = max_semantics ? std::max(acc, v) : acc + v;
  }
  return acc;
}

// Calls fn(state) for every complete state consistent with the evidence.
inline void for_each_completion(const Evidence& ev, const std::function<void(const std::vector<std::uint8_t>&)>& fn) {
  std::vector<std::size_t> free;
  std::vector<std::uint8_t> state(ev.size(), 0);
  for (std::size_t v = 0; v < ev.size(); ++v) {
    if (ev[v] == VarState::Marginalized) free.push_back(v);
    else state[v] = ev[v] == VarState::True;
  }
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free.size()); ++mask) {
    for (std::size_t i = 0; i < free.size(); ++i) state[free[i]] = (mask >> i) & 1;
    fn(state);
  }
}

// Σ over consistent states of the network polynomial term.
inline double brute_force_marginal(const SpnGraph& g, const Evidence& ev) {
  double total = 0.0;
  for_each_completion(ev, [&](const auto& s) { total += naive_value(g, g.root(), s, false); });
  return total;
}

struct BruteMax {
  double value = 0.0;
  std::vector<std::uint8_t> argmax;
};

inline BruteMax brute_force_max(const SpnGraph& g, const Evidence& ev) {
  BruteMax best{-1.0, {}};
  for_each_completion(ev, [&](const auto& s) {
    const double v = naive_value(g, g.root(), s, true);
    if (v > best.value) best = {v, s};
  });
  return best;
}

inline Evidence random_evidence(Rng& rng, std::size_t d, double marginal_probability = 0.4) {
  Evidence ev(d);
  for (std::size_t v = 0; v < d; ++v) {
    if (rng.uniform() < marginal_probability) continue;
    ev.set(v, rng.below(2) ? VarState::True : VarState::False);
  }
  return ev;
}

inline bool rel_close(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

// Central finite difference of log M(a) − log M(b) with respect to the
// weight of one edge, recomputed with naive max-product recursion.
inline double fd_pair_slope(SpnGraph g, std::size_t edge, const std::vector<std::uint8_t>& a,
                            const std::vector<std::uint8_t>& b, double rel_step = 1e-6) {
  const auto [node, pos] = g.edge_at(edge);
  const double w = g.weight(edge);
  const double h = rel_step * w;
  auto diff = [&](double value) {
    g.set_weight(node, pos, value);
    return std::log(naive_value(g, g.root(), a, true)) - std::log(naive_value(g, g.root(), b, true));
  };
  return (diff(w + h) - diff(w - h)) / (2.0 * h);
}

// Smallest relative gap between the best and second-best child of any sum
// node on the max-product recursion for `state`; tiny values flag near-ties.
inline double max_product_margin(const SpnGraph& g, const std::vector<std::uint8_t>& state) {
  double margin = INFINITY;
  for (NodeId id = 0; id < g.size(); ++id) {
    const Node& n = g.node(id);
    if (!n.is_sum() || n.children.size() < 2) continue;
    std::vector<double> v;
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      v.push_back(n.weights[i] * naive_value(g, n.children[i], state, true));
    }
    std::sort(v.rbegin(), v.rend());
    if (v[0] > 0.0) margin = std::min(margin, (v[0] - v[1]) / v[0]);
  }
  return margin;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("spnrank_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace spnrank::testing
