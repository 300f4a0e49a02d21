#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/rank/dataset.hpp"

namespace spnrank {

struct EvalBucket {
  std::int64_t min_gap = 0;
  std::int64_t max_gap = 0;
  std::size_t pair_count = 0;
  std::size_t correct = 0;
  std::size_t ties = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::int64_t theta = 0;
  std::size_t pair_count = 0;
  std::size_t correct = 0;
  std::size_t ties = 0;
  double accuracy = 0.0;             // correct / (pair_count − ties)
  std::vector<EvalBucket> buckets;   // by Δn decile
};

inline double accuracy_of(std::size_t correct, std::size_t pairs, std::size_t ties) {
  return pairs > ties ? static_cast<double>(correct) / static_cast<double>(pairs - ties) : 0.0;
}

// Pairwise ranking accuracy over every pair of items whose like counts
// differ by more than theta: a pair is correct when the item with more
// likes has the strictly larger score, and a tie when the scores are equal.
inline EvalReport evaluate_ranking(const Dataset& data, std::span<const double> scores, std::int64_t theta) {
  if (scores.size() != data.size()) throw DataError("one score per item is required");
  struct Outcome {
    std::int64_t gap;
    bool correct;
    bool tie;
  };
  std::vector<Outcome> outcomes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = i + 1; j < data.size(); ++j) {
      const std::int64_t diff = data[i].like_count - data[j].like_count;
      if (std::llabs(diff) <= theta) continue;
      const std::size_t hi = diff > 0 ? i : j;
      const std::size_t lo = diff > 0 ? j : i;
      outcomes.push_back({std::llabs(diff), scores[hi] > scores[lo], scores[hi] == scores[lo]});
    }
  }
  if (outcomes.empty()) throw DataError("no qualifying pairs");

  EvalReport report;
  report.theta = theta;
  report.pair_count = outcomes.size();
  for (const auto& o : outcomes) {
    report.correct += o.correct;
    report.ties += o.tie;
  }
  report.accuracy = accuracy_of(report.correct, report.pair_count, report.ties);

  std::stable_sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.gap < b.gap; });
  const std::size_t n = outcomes.size();
  for (std::size_t b = 0; b < 10; ++b) {
    const std::size_t begin = n * b / 10, end = n * (b + 1) / 10;
    if (begin == end) continue;
    EvalBucket bucket;
    bucket.min_gap = outcomes[begin].gap;
    bucket.max_gap = outcomes[end - 1].gap;
    for (std::size_t k = begin; k < end; ++k) {
      ++bucket.pair_count;
      bucket.correct += outcomes[k].correct;
      bucket.ties += outcomes[k].tie;
    }
    bucket.accuracy = accuracy_of(bucket.correct, bucket.pair_count, bucket.ties);
    report.buckets.push_back(bucket);
  }
  return report;
}

}  // namespace spnrank
