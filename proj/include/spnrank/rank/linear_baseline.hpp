#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/random.hpp"
#include "spnrank/rank/dataset.hpp"
#include "spnrank/rank/learner.hpp"
#include "spnrank/rank/pairs.hpp"

namespace spnrank {

struct LinearTrainConfig {
  std::size_t epochs = 30;
  double lambda = 1e-3;  // L2 regularisation of the Pegasos objective
  std::uint64_t seed = 0;
};

// Linear pairwise ranker: score(x) = w·x. Comparison baseline only.
struct LinearRanker {
  std::vector<double> weights;

  double score(const AttributeVector& item) const {
    if (item.bits.size() != weights.size()) {
      throw DataError("item '" + item.id + "' has " + std::to_string(item.bits.size()) +
                      " attributes, linear ranker has " + std::to_string(weights.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (item.bits[i]) s += weights[i];
    }
    return s;
  }

  std::vector<double> score_all(const Dataset& data) const {
    std::vector<double> out;
    out.reserve(data.size());
    for (const auto& d : data) out.push_back(score(d));
    return out;
  }

  Ordering rank(const AttributeVector& a, const AttributeVector& b) const { return order_scores(score(a), score(b)); }
};

// Pegasos-style stochastic subgradient descent on
//   λ/2‖w‖² + mean over P1 of max(0, 1 − w·(x_h − x_l)).
inline LinearRanker linear_baseline_train(const Dataset& data, const PairSets& pairs, const LinearTrainConfig& config) {
  const std::size_t d = dataset_width(data);
  for (const auto& item : data) {
    if (item.bits.size() != d) throw DataError("dataset rows have differing widths");
  }
  if (config.lambda <= 0.0) throw UsageError("linear baseline lambda must be positive");
  LinearRanker model{std::vector<double>(d, 0.0)};
  if (pairs.p1.empty()) return model;

  Rng rng(config.seed, "linear-baseline");
  std::vector<std::size_t> order(pairs.p1.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diff(d);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (auto idx : order) {
      ++t;
      const auto& p = pairs.p1[idx];
      const auto& h = data[p.first].bits;
      const auto& l = data[p.second].bits;
      double margin = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        diff[i] = static_cast<double>(h[i]) - static_cast<double>(l[i]);
        margin += model.weights[i] * diff[i];
      }
      const double eta = 1.0 / (config.lambda * static_cast<double>(t));
      const double shrink = 1.0 - eta * config.lambda;
      for (auto& w : model.weights) w *= shrink;
      if (margin < 1.0) {
        for (std::size_t i = 0; i < d; ++i) model.weights[i] += eta * diff[i];
      }
    }
  }
  return model;
}

}  // namespace spnrank
