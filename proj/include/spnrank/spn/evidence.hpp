#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/spn/graph.hpp"

namespace spnrank {

enum class VarState : std::uint8_t { False, True, Marginalized };

// Per-variable observation. Marginalized means both indicators are active,
// so the indicator pair (0,0) cannot be expressed.
class Evidence {
 public:
  explicit Evidence(std::size_t num_variables, VarState fill = VarState::Marginalized)
      : states_(num_variables, fill) {}

  explicit Evidence(std::vector<VarState> states) : states_(std::move(states)) {}

  // Complete evidence from a bit vector: non-zero ⇒ True.
  static Evidence from_bits(std::span<const std::uint8_t> bits) {
    std::vector<VarState> s(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? VarState::True : VarState::False;
    return Evidence(std::move(s));
  }

  // From the flattened indicator inputs (x_0, x̄_0, x_1, x̄_1, ...).
  static Evidence from_indicators(std::span<const int> indicators) {
    if (indicators.size() % 2 != 0) throw DataError("indicator vector must have even length");
    std::vector<VarState> s(indicators.size() / 2);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const int pos = indicators[2 * i];
      const int neg = indicators[2 * i + 1];
      if ((pos != 0 && pos != 1) || (neg != 0 && neg != 1)) throw DataError("indicators must be 0 or 1");
      if (pos == 0 && neg == 0) {
        throw DataError("indicator pair (0,0) for variable " + std::to_string(i) + " is not valid evidence");
      }
      s[i] = pos && neg ? VarState::Marginalized : (pos ? VarState::True : VarState::False);
    }
    return Evidence(std::move(s));
  }

  std::size_t size() const { return states_.size(); }
  VarState operator[](std::size_t i) const { return states_[i]; }
  void set(std::size_t i, VarState s) { states_.at(i) = s; }
  const std::vector<VarState>& states() const { return states_; }

  bool indicator(std::size_t var, Polarity p) const {
    const VarState s = states_[var];
    if (s == VarState::Marginalized) return true;
    return (s == VarState::True) == (p == Polarity::Positive);
  }

  bool complete() const {
    for (VarState s : states_) {
      if (s == VarState::Marginalized) return false;
    }
    return true;
  }

  friend bool operator==(const Evidence&, const Evidence&) = default;

 private:
  std::vector<VarState> states_;
};

inline void require_dimension(const SpnGraph& graph, const Evidence& evidence) {
  if (evidence.size() != graph.num_variables()) {
    throw DataError("evidence has " + std::to_string(evidence.size()) + " variables, SPN has " +
                    std::to_string(graph.num_variables()));
  }
}

}  // namespace spnrank
