#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/rank/learner.hpp"

namespace spnrank {

// An attribute set: the listed bits on, every other bit off.
using AttributeSet = std::vector<std::size_t>;

struct ProbeResult {
  AttributeSet set;
  double log_value = 0.0;
  std::size_t rank = 0;  // 1 + number of sets with a strictly larger value
};

inline AttributeVector probe_vector(const SpnGraph& graph, const AttributeSet& set) {
  AttributeVector item;
  item.bits.assign(graph.num_variables(), 0);
  for (auto i : set) {
    if (i >= graph.num_variables()) {
      throw UsageError("attribute index " + std::to_string(i) + " out of range for " +
                       std::to_string(graph.num_variables()) + " variables");
    }
    item.bits[i] = 1;
  }
  return item;
}

// Log MPN root value of each set's vector and its rank among the sets.
inline std::vector<ProbeResult> probe_sets(const SpnGraph& graph, const std::vector<AttributeSet>& sets) {
  std::vector<ProbeResult> out;
  for (const auto& s : sets) out.push_back({s, score(graph, probe_vector(graph, s)), 0});
  for (auto& r : out) {
    r.rank = 1 + static_cast<std::size_t>(std::count_if(out.begin(), out.end(), [&](const ProbeResult& o) {
               return o.log_value > r.log_value;
             }));
  }
  return out;
}

}  // namespace spnrank
