#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/random.hpp"
#include "spnrank/spn/graph.hpp"

namespace spnrank {

struct StructureConfig {
  std::size_t k = 10;                          // sum nodes per non-root region
  std::size_t num_decompositions_per_region = 1;
  std::size_t max_region_size_for_leaf = 1;    // regions this small are not split further
  std::uint64_t rng_seed = 0;
  std::size_t node_budget = 2'000'000;
};

namespace detail {

class RegionBuilder {
 public:
  RegionBuilder(std::size_t num_variables, const StructureConfig& config)
      : config_(config), rng_(config.rng_seed, "structure") {
    for (std::uint32_t v = 0; v < num_variables; ++v) {
      add(Node::leaf(v, Polarity::Positive));
      add(Node::leaf(v, Polarity::Negative));
    }
  }

  std::vector<Node> take() { return std::move(nodes_); }

  // Sum nodes of the region over `scope` (sorted), building it on first use.
  const std::vector<NodeId>& region(const std::vector<std::uint32_t>& scope, bool is_root) {
    if (auto it = regions_.find(scope); it != regions_.end()) return it->second;
    std::vector<NodeId> sums;
    if (scope.size() == 1) {
      sums = indicator_mixtures(scope.front());
    } else if (scope.size() <= config_.max_region_size_for_leaf) {
      sums = factorized(scope, is_root);
    } else {
      sums = decomposed(scope, is_root);
    }
    return regions_.emplace(scope, std::move(sums)).first->second;
  }

 private:
  NodeId add(Node n) {
    if (nodes_.size() >= config_.node_budget) {
      throw UsageError("structure exceeds node budget of " + std::to_string(config_.node_budget) +
                       " nodes; lower k or num_decompositions_per_region");
    }
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<double> random_weights(std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& x : w) total += (x = rng_.uniform(0.05, 1.0));
    for (auto& x : w) x /= total;
    return w;
  }

  NodeId add_sum(std::vector<NodeId> children) {
    auto w = random_weights(children.size());
    return add(Node::sum(std::move(children), std::move(w)));
  }

  std::vector<NodeId> indicator_mixtures(std::uint32_t var) {
    std::vector<NodeId> sums;
    for (std::size_t j = 0; j < config_.k; ++j) sums.push_back(add_sum({2 * var, 2 * var + 1}));
    return sums;
  }

  std::size_t sums_for(bool is_root) const { return is_root ? 1 : config_.k; }

  // k fully factorized components: product j joins sum j of every variable.
  std::vector<NodeId> factorized(const std::vector<std::uint32_t>& scope, bool is_root) {
    std::vector<const std::vector<NodeId>*> parts;
    for (auto v : scope) parts.push_back(&region({v}, false));
    std::vector<NodeId> products;
    for (std::size_t j = 0; j < config_.k; ++j) {
      std::vector<NodeId> children;
      for (const auto* p : parts) children.push_back((*p)[j]);
      products.push_back(add(Node::product(std::move(children))));
    }
    std::vector<NodeId> sums;
    for (std::size_t j = 0; j < sums_for(is_root); ++j) sums.push_back(add_sum(products));
    return sums;
  }

  // Random balanced binary partitions; each yields k×k product nodes.
  std::vector<NodeId> decomposed(const std::vector<std::uint32_t>& scope, bool is_root) {
    std::set<std::pair<std::vector<std::uint32_t>, std::vector<std::uint32_t>>> splits;
    for (std::size_t d = 0; d < config_.num_decompositions_per_region; ++d) {
      std::vector<std::uint32_t> shuffled = scope;
      rng_.shuffle(std::span(shuffled));
      const auto half = shuffled.begin() + static_cast<std::ptrdiff_t>(shuffled.size() / 2);
      std::vector<std::uint32_t> left(shuffled.begin(), half), right(half, shuffled.end());
      std::sort(left.begin(), left.end());
      std::sort(right.begin(), right.end());
      if (right < left) std::swap(left, right);
      splits.emplace(std::move(left), std::move(right));
    }
    std::vector<NodeId> products;
    for (const auto& [left, right] : splits) {
      const std::vector<NodeId> ls = region(left, false);
      const std::vector<NodeId> rs = region(right, false);
      for (NodeId a : ls) {
        for (NodeId b : rs) products.push_back(add(Node::product({a, b})));
      }
    }
    std::vector<NodeId> sums;
    for (std::size_t j = 0; j < sums_for(is_root); ++j) sums.push_back(add_sum(products));
    return sums;
  }

  StructureConfig config_;
  Rng rng_;
  std::vector<Node> nodes_;
  std::map<std::vector<std::uint32_t>, std::vector<NodeId>> regions_;
};

}  // namespace detail

// Region-decomposition initialisation: the root region covers every
// variable and owns the single root sum node; every other region owns k sum
// nodes; each decomposition of a region into two sub-regions contributes one
// product node per pair of child sum nodes; single-variable regions are k
// random mixtures of the two indicators. Weights are random, positive and
// normalised per sum node. Deterministic given config.rng_seed.
inline SpnGraph init_structure(std::size_t num_variables, const StructureConfig& config) {
  if (num_variables < 2) throw UsageError("init_structure needs at least 2 variables");
  if (config.k == 0) throw UsageError("k must be positive");
  if (config.num_decompositions_per_region == 0) throw UsageError("num_decompositions_per_region must be positive");
  if (config.max_region_size_for_leaf == 0) throw UsageError("max_region_size_for_leaf must be positive");
  detail::RegionBuilder builder(num_variables, config);
  std::vector<std::uint32_t> all(num_variables);
  for (std::uint32_t v = 0; v < num_variables; ++v) all[v] = v;
  const NodeId root = builder.region(all, true).front();
  return SpnGraph(builder.take(), root, num_variables);
}

}  // namespace spnrank
