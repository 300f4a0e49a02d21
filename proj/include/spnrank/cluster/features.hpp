#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spnrank/csv.hpp"
#include "spnrank/error.hpp"
#include "spnrank/files.hpp"

namespace spnrank::cluster {

// One point per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Squared Euclidean distance between row i of a and row j of b, summed
// left to right so every caller rounds identically.
inline double squared_distance(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double t = a(i, k) - b(j, k);
    s += t * t;
  }
  return s;
}

struct PatchRef {
  std::string image_id;
  std::uint32_t patch_index = 0;
  friend bool operator==(const PatchRef&, const PatchRef&) = default;
};

struct PatchFeatures {
  std::vector<PatchRef> refs;
  Matrix x;

  std::size_t size() const { return refs.size(); }
  std::size_t dimension() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t image_count() const;
};

inline std::size_t PatchFeatures::image_count() const {
  std::vector<std::string> ids;
  for (const auto& r : refs) ids.push_back(r.image_id);
  std::sort(ids.begin(), ids.end());
  return static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

inline void require_finite(const PatchFeatures& f) {
  if (static_cast<std::size_t>(f.x.rows()) != f.refs.size()) throw DataError("feature rows and patch refs differ");
  for (Eigen::Index i = 0; i < f.x.rows(); ++i) {
    if (!f.x.row(i).allFinite()) {
      throw DataError("non-finite feature for patch " + f.refs[i].image_id + "#" + std::to_string(f.refs[i].patch_index));
    }
  }
}

// CSV: header "image_id,patch_index,f_0,...,f_{D-1}".
inline PatchFeatures load_features_csv(const std::string& path) {
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() < 3 || f[0] != "image_id" || f[1] != "patch_index") {
    reader.fail("expected header 'image_id,patch_index,f_0,...'");
  }
  const std::size_t d = f.size() - 2;
  for (std::size_t j = 0; j < d; ++j) {
    if (f[j + 2] != "f_" + std::to_string(j)) reader.fail("feature column " + std::to_string(j) + " must be named f_" + std::to_string(j));
  }
  PatchFeatures out;
  std::vector<double> values;
  while (reader.next(f)) {
    if (f.size() != d + 2) reader.fail("expected " + std::to_string(d + 2) + " fields");
    out.refs.push_back({f[0], reader.number<std::uint32_t>(f[1], "patch_index")});
    for (std::size_t j = 0; j < d; ++j) {
      const double v = reader.number<double>(f[j + 2], "feature");
      if (!std::isfinite(v)) reader.fail("non-finite feature value");
      values.push_back(v);
    }
  }
  out.x = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(out.refs.size()), static_cast<Eigen::Index>(d));
  return out;
}

inline std::string features_to_csv(const PatchFeatures& f) {
  std::string out = "image_id,patch_index";
  for (std::size_t j = 0; j < f.dimension(); ++j) out += ",f_" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < f.size(); ++i) {
    out += f.refs[i].image_id + ',' + std::to_string(f.refs[i].patch_index);
    for (Eigen::Index j = 0; j < f.x.cols(); ++j) out += ',' + format_double(f.x(static_cast<Eigen::Index>(i), j));
    out += '\n';
  }
  return out;
}

// Binary block format, all integers and doubles little-endian:
//   "SPNF" | u32 version (1) | u32 D | u64 count
//   count × { u32 id_length | id bytes | u32 patch_index | D × f64 }
inline constexpr char kFeatureMagic[4] = {'S', 'P', 'N', 'F'};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

class ByteReader {
 public:
  ByteReader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > data_.size()) fail(std::string("truncated while reading ") + what);
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string bytes(std::size_t n, const char* what) {
    if (pos_ + n > data_.size()) fail(std::string("truncated while reading ") + what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(path_ + ": byte " + std::to_string(pos_) + ": " + msg);
  }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string features_to_binary(const PatchFeatures& f) {
  std::string out(kFeatureMagic, 4);
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.dimension()));
  detail::put_le<std::uint64_t>(out, f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.refs[i].image_id.size()));
    out += f.refs[i].image_id;
    detail::put_le<std::uint32_t>(out, f.refs[i].patch_index);
    for (Eigen::Index j = 0; j < f.x.cols(); ++j) detail::put_le<double>(out, f.x(static_cast<Eigen::Index>(i), j));
  }
  return out;
}

inline PatchFeatures features_from_binary(std::string data, const std::string& path = "<memory>") {
  detail::ByteReader in(std::move(data), path);
  if (in.bytes(4, "magic") != std::string(kFeatureMagic, 4)) in.fail("bad magic (expected SPNF)");
  if (const auto v = in.get<std::uint32_t>("version"); v != 1) in.fail("unsupported version " + std::to_string(v));
  const auto d = in.get<std::uint32_t>("dimension");
  const auto count = in.get<std::uint64_t>("count");
  PatchFeatures out;
  std::vector<double> values;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint32_t>("id length");
    PatchRef ref;
    ref.image_id = in.bytes(len, "image id");
    ref.patch_index = in.get<std::uint32_t>("patch index");
    for (std::uint32_t j = 0; j < d; ++j) {
      const double v = in.get<double>("feature");
      if (!std::isfinite(v)) in.fail("non-finite feature value");
      values.push_back(v);
    }
    out.refs.push_back(std::move(ref));
  }
  if (!in.done()) in.fail("trailing bytes after last record");
  out.x = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d));
  return out;
}

inline bool has_binary_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::memcmp(magic, kFeatureMagic, 4) == 0;
}

// Either format, chosen by the leading magic bytes.
inline PatchFeatures load_features(const std::string& path) {
  if (has_binary_magic(path)) return features_from_binary(read_text_file(path), path);
  return load_features_csv(path);
}

inline void save_features(const std::string& path, const PatchFeatures& f, bool binary) {
  write_text_file(path, binary ? features_to_binary(f) : features_to_csv(f));
}

// Patch rows of each image ordered by patch index; every image must carry
// exactly patches 0..p−1.
struct ImagePatches {
  std::string image_id;
  std::vector<std::size_t> rows;
};

inline std::vector<ImagePatches> group_by_image(const PatchFeatures& f) {
  std::map<std::string, std::vector<std::pair<std::uint32_t, std::size_t>>> by_image;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto [it, fresh] = by_image.try_emplace(f.refs[i].image_id);
    if (fresh) order.push_back(f.refs[i].image_id);
    it->second.push_back({f.refs[i].patch_index, i});
  }
  std::vector<ImagePatches> out;
  std::size_t p = 0;
  for (const auto& id : order) {
    auto& rows = by_image[id];
    std::sort(rows.begin(), rows.end());
    if (out.empty()) p = rows.size();
    if (rows.size() != p) {
      throw DataError("image '" + id + "' has " + std::to_string(rows.size()) + " patches, expected " + std::to_string(p));
    }
    ImagePatches img{id, {}};
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].first != k) throw DataError("image '" + id + "' is missing patch " + std::to_string(k));
      img.rows.push_back(rows[k].second);
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace spnrank::cluster
