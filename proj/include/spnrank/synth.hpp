#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spnrank/error.hpp"
#include "spnrank/random.hpp"
#include "spnrank/rank/dataset.hpp"

namespace spnrank::synth {

struct XorParams {
  std::size_t num_variables = 16;
  std::size_t num_items = 2000;
  std::size_t xor_pairs = 4;      // attribute pairs (0,1), (2,3), ... drive the likes
  std::int64_t likes_per_pair = 20;
  std::int64_t noise = 9;         // uniform extra likes in [0, noise]
  std::uint64_t seed = 7;
};

// Likeability depends only on the parity of designated attribute pairs:
//   n(I) = likes_per_pair · #{j : x_{2j} ⊕ x_{2j+1}} + U{0..noise}.
// Every single attribute is independent of n(I), so no linear score over
// the bits ranks better than chance.
inline Dataset xor_likeability(const XorParams& p) {
  if (p.num_variables < 2 * p.xor_pairs || p.xor_pairs == 0) {
    throw UsageError("xor needs 1 <= xor_pairs <= num_variables / 2");
  }
  if (p.num_items == 0) throw UsageError("num_items must be positive");
  Rng rng(p.seed, "synth");
  Dataset data;
  for (std::size_t i = 0; i < p.num_items; ++i) {
    AttributeVector item;
    item.id = "x" + std::to_string(i);
    item.bits.resize(p.num_variables);
    for (auto& b : item.bits) b = static_cast<std::uint8_t>(rng.below(2));
    std::int64_t active = 0;
    for (std::size_t j = 0; j < p.xor_pairs; ++j) active += item.bits[2 * j] != item.bits[2 * j + 1];
    item.like_count = p.likes_per_pair * active + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(p.noise) + 1));
    data.push_back(std::move(item));
  }
  return data;
}

struct SeparableParams {
  std::size_t num_variables = 16;
  std::size_t num_items = 500;
  double margin = 1.0;  // likes per unit of the hidden linear score
  std::uint64_t seed = 7;
};

struct SeparableData {
  Dataset data;
  std::vector<double> hidden_weights;
};

// Like counts are a rounded, shifted linear function w*·x of the bits, so
// any pair whose counts differ by more than one is ordered by w*.
inline SeparableData separable(const SeparableParams& p) {
  if (p.num_items == 0 || p.num_variables == 0) throw UsageError("separable needs positive sizes");
  if (!(p.margin > 0.0)) throw UsageError("margin must be positive");
  Rng rng(p.seed, "synth");
  SeparableData out;
  out.hidden_weights.resize(p.num_variables);
  for (auto& w : out.hidden_weights) w = 10.0 * rng.normal();
  std::vector<double> raw;
  for (std::size_t i = 0; i < p.num_items; ++i) {
    AttributeVector item;
    item.id = "s" + std::to_string(i);
    item.bits.resize(p.num_variables);
    double s = 0.0;
    for (std::size_t v = 0; v < p.num_variables; ++v) {
      item.bits[v] = static_cast<std::uint8_t>(rng.below(2));
      if (item.bits[v]) s += out.hidden_weights[v];
    }
    raw.push_back(p.margin * s);
    out.data.push_back(std::move(item));
  }
  double lo = raw.front();
  for (double r : raw) lo = std::min(lo, r);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.data[i].like_count = static_cast<std::int64_t>(std::llround(raw[i] - lo));
  }
  return out;
}

// Deterministic split: every `stride`-th item (starting at offset) goes to
// the second part.
inline std::pair<Dataset, Dataset> split_every(const Dataset& data, std::size_t stride, std::size_t offset = 0) {
  std::pair<Dataset, Dataset> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (i % stride == offset ? out.second : out.first).push_back(data[i]);
  }
  return out;
}

}  // namespace spnrank::synth
