#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "spnrank/error.hpp"

namespace spnrank::cluster {

// Adjusted Rand index between two labelings of the same points.
template <typename A, typename B>
double adjusted_rand_index(const std::vector<A>& truth, const std::vector<B>& predicted) {
  if (truth.size() != predicted.size()) throw DataError("labelings differ in length");
  const double n = static_cast<double>(truth.size());
  if (truth.size() < 2) return 1.0;
  std::map<std::pair<A, B>, double> joint;
  std::map<A, double> rows;
  std::map<B, double> cols;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    joint[{truth[i], predicted[i]}] += 1.0;
    rows[truth[i]] += 1.0;
    cols[predicted[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, a = 0.0, b = 0.0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : rows) a += c2(v);
  for (const auto& [k, v] : cols) b += c2(v);
  const double expected = a * b / c2(n);
  const double max_index = 0.5 * (a + b);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

// Fraction of points whose cluster's majority true label matches their own.
template <typename A, typename B>
double purity(const std::vector<A>& truth, const std::vector<B>& predicted) {
  if (truth.size() != predicted.size()) throw DataError("labelings differ in length");
  if (truth.empty()) return 1.0;
  std::map<B, std::map<A, std::size_t>> table;
  for (std::size_t i = 0; i < truth.size(); ++i) ++table[predicted[i]][truth[i]];
  std::size_t hits = 0;
  for (const auto& [c, counts] : table) {
    std::size_t best = 0;
    for (const auto& [l, k] : counts) best = std::max(best, k);
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace spnrank::cluster
