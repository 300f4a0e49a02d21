#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "spnrank/csv.hpp"
#include "spnrank/error.hpp"
#include "spnrank/random.hpp"
#include "spnrank/rank/dataset.hpp"

namespace spnrank {

// Indices into a Dataset. For P1 pairs `first` is the item with more likes.
struct ItemPair {
  std::size_t first = 0;
  std::size_t second = 0;
  friend bool operator==(const ItemPair&, const ItemPair&) = default;
  friend auto operator<=>(const ItemPair&, const ItemPair&) = default;
};

struct PairSets {
  std::vector<ItemPair> p1;  // n(first) − n(second) > c1
  std::vector<ItemPair> p2;  // |n(first) − n(second)| ≤ c2
  std::int64_t c1 = 1;
  std::int64_t c2 = 0;

  bool empty() const { return p1.empty() && p2.empty(); }
};

namespace detail {

// Algorithm R: uniform sample of at most `capacity` items from a stream.
class Reservoir {
 public:
  Reservoir(std::size_t capacity, Rng& rng) : capacity_(capacity), rng_(rng) {}

  void offer(const ItemPair& p) {
    ++seen_;
    if (capacity_ == 0 || items_.size() < capacity_) {
      items_.push_back(p);
      return;
    }
    const auto r = rng_.below(seen_);
    if (r < capacity_) items_[r] = p;
  }

  std::vector<ItemPair> take() { return std::move(items_); }

 private:
  std::size_t capacity_;
  Rng& rng_;
  std::vector<ItemPair> items_;
  std::uint64_t seen_ = 0;
};

}  // namespace detail

// Every qualifying pair of items, each set subsampled uniformly to at most
// max_pairs (0 = keep all) and shuffled, both with the given seed.
inline PairSets make_pairs(const Dataset& data, std::int64_t c1, std::int64_t c2, std::size_t max_pairs,
                           std::uint64_t seed) {
  if (data.empty()) throw DataError("make_pairs: empty dataset");
  if (c1 < 1) throw UsageError("C1 must be a positive integer");
  if (c2 < 0) throw UsageError("C2 must be non-negative");
  Rng rng(seed, "pairs");
  detail::Reservoir ordered(max_pairs, rng), unordered(max_pairs, rng);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = i + 1; j < data.size(); ++j) {
      const std::int64_t diff = data[i].like_count - data[j].like_count;
      if (diff > c1) ordered.offer({i, j});
      if (-diff > c1) ordered.offer({j, i});
      if (std::llabs(diff) <= c2) unordered.offer({i, j});
    }
  }
  PairSets out;
  out.c1 = c1;
  out.c2 = c2;
  out.p1 = ordered.take();
  out.p2 = unordered.take();
  if (out.empty()) throw DataError("no qualifying pairs");
  rng.shuffle(std::span(out.p1));
  rng.shuffle(std::span(out.p2));
  return out;
}

// CSV: header "id_a,id_b,set" with set ∈ {P1, P2}.
inline std::string pairs_to_csv(const Dataset& data, const PairSets& pairs) {
  std::string out = "id_a,id_b,set\n";
  for (const auto& p : pairs.p1) out += data[p.first].id + "," + data[p.second].id + ",P1\n";
  for (const auto& p : pairs.p2) out += data[p.first].id + "," + data[p.second].id + ",P2\n";
  return out;
}

inline void save_pairs(const std::string& path, const Dataset& data, const PairSets& pairs) {
  write_text_file(path, pairs_to_csv(data, pairs));
}

// Reads a pair file against `data`, checking each pair against c1/c2.
inline PairSets load_pairs(const std::string& path, const Dataset& data, std::int64_t c1, std::int64_t c2) {
  const auto index = index_by_id(data);
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 3 || f[0] != "id_a" || f[1] != "id_b" || f[2] != "set") {
    reader.fail("expected header 'id_a,id_b,set'");
  }
  PairSets out;
  out.c1 = c1;
  out.c2 = c2;
  while (reader.next(f)) {
    if (f.size() != 3) reader.fail("expected 3 fields");
    const auto a = index.find(f[0]);
    const auto b = index.find(f[1]);
    if (a == index.end()) reader.fail("unknown id '" + f[0] + "'");
    if (b == index.end()) reader.fail("unknown id '" + f[1] + "'");
    const ItemPair p{a->second, b->second};
    const std::int64_t diff = data[p.first].like_count - data[p.second].like_count;
    if (f[2] == "P1") {
      if (diff <= c1) reader.fail("P1 pair violates n(a) - n(b) > C1");
      out.p1.push_back(p);
    } else if (f[2] == "P2") {
      if (std::llabs(diff) > c2) reader.fail("P2 pair violates |n(a) - n(b)| <= C2");
      out.p2.push_back(p);
    } else {
      reader.fail("set must be P1 or P2");
    }
  }
  return out;
}

}  // namespace spnrank
