#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "spnrank/csv.hpp"
#include "spnrank/error.hpp"
#include "spnrank/spn/evidence.hpp"
#include "spnrank/spn/io.hpp"

namespace spnrank {

// Binary attribute activations of one item plus its like count n(I).
struct AttributeVector {
  std::string id;
  std::int64_t like_count = 0;
  std::vector<std::uint8_t> bits;

  Evidence evidence() const { return Evidence::from_bits(bits); }
  friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
};

using Dataset = std::vector<AttributeVector>;

inline std::size_t dataset_width(const Dataset& data) {
  if (data.empty()) throw DataError("dataset is empty");
  return data.front().bits.size();
}

inline std::unordered_map<std::string, std::size_t> index_by_id(const Dataset& data) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!index.emplace(data[i].id, i).second) throw DataError("duplicate item id '" + data[i].id + "'");
  }
  return index;
}

// CSV: header "id,like_count,bits"; bits is a string of '0'/'1'.
inline Dataset load_dataset(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 3 || f[0] != "id" || f[1] != "like_count" || f[2] != "bits") {
    reader.fail("expected header 'id,like_count,bits'");
  }
  Dataset data;
  while (reader.next(f)) {
    if (f.size() != 3) reader.fail("expected 3 fields, got " + std::to_string(f.size()));
    AttributeVector item;
    item.id = f[0];
    if (item.id.empty()) reader.fail("empty id");
    item.like_count = reader.number<std::int64_t>(f[1], "like_count");
    if (item.like_count < 0) reader.fail("negative like_count");
    item.bits.reserve(f[2].size());
    for (char c : f[2]) {
      if (c != '0' && c != '1') reader.fail("bits must be a string of '0'/'1'");
      item.bits.push_back(c == '1');
    }
    if (!data.empty() && item.bits.size() != data.front().bits.size()) {
      reader.fail("bit string length " + std::to_string(item.bits.size()) + " differs from " +
                  std::to_string(data.front().bits.size()));
    }
    data.push_back(std::move(item));
  }
  index_by_id(data);
  return data;
}

inline std::string dataset_to_csv(const Dataset& data) {
  std::string out = "id,like_count,bits\n";
  for (const auto& item : data) {
    out += item.id + "," + std::to_string(item.like_count) + ",";
    for (auto b : item.bits) out += b ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  write_text_file(path, dataset_to_csv(data));
}

}  // namespace spnrank
