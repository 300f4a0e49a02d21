#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "spnrank/cluster/agglomerate.hpp"
#include "spnrank/cluster/features.hpp"
#include "spnrank/cluster/kmeans.hpp"
#include "spnrank/error.hpp"
#include "spnrank/files.hpp"
#include "spnrank/rank/dataset.hpp"

namespace spnrank::cluster {

struct DiscoveryConfig {
  std::size_t k_over = 2000;
  std::size_t n_c = 1000;
  double coverage = 0.90;
  std::size_t drop_min_size = 5;
  double drop_distance_factor = 3.0;
  std::size_t outer_iterations = 1;
  std::size_t kmeans_max_iterations = 100;
  std::uint64_t rng_seed = 0;
  double activation_percentile = 0.95;
};

// Affine map y = (x − offset)·projection. An empty projection is the
// identity.
struct LinearMap {
  Vector offset;
  Matrix projection;  // D_in × D_out

  bool identity() const { return projection.size() == 0; }
  std::size_t output_dimension(std::size_t input) const {
    return identity() ? input : static_cast<std::size_t>(projection.cols());
  }

  Matrix apply(const Matrix& x) const {
    if (identity()) return x;
    if (static_cast<std::size_t>(x.cols()) != static_cast<std::size_t>(projection.rows())) {
      throw DataError("feature dimension " + std::to_string(x.cols()) + " does not match projection input " +
                      std::to_string(projection.rows()));
    }
    return (x.rowwise() - offset.transpose()) * projection;
  }
};

// Feature refresh between outer iterations. fit() sees the original
// features and the current cluster label of every patch (−1 when the patch
// is in no kept cluster) and returns the map applied on the next pass.
class FeatureTransform {
 public:
  virtual ~FeatureTransform() = default;
  virtual std::string name() const = 0;
  virtual LinearMap fit(const Matrix& x, const std::vector<int>& labels) const = 0;
};

class IdentityTransform final : public FeatureTransform {
 public:
  std::string name() const override { return "identity"; }
  LinearMap fit(const Matrix&, const std::vector<int>&) const override { return {}; }
};

// Fisher LDA on the current clusters: top eigenvectors of the generalised
// problem S_b v = λ (S_w + ridge·I) v.
class LdaTransform final : public FeatureTransform {
 public:
  explicit LdaTransform(std::size_t dims = 0, double ridge = 1e-3) : dims_(dims), ridge_(ridge) {}

  std::string name() const override { return "lda"; }

  LinearMap fit(const Matrix& x, const std::vector<int>& labels) const override {
    const Eigen::Index d = x.cols();
    int classes = 0;
    for (int l : labels) classes = std::max(classes, l + 1);
    if (classes < 2) return {};
    std::vector<Vector> sums(static_cast<std::size_t>(classes), Vector::Zero(d));
    std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
    Vector mean = Vector::Zero(d);
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0) continue;
      sums[static_cast<std::size_t>(labels[i])] += x.row(static_cast<Eigen::Index>(i)).transpose();
      counts[static_cast<std::size_t>(labels[i])] += 1.0;
      mean += x.row(static_cast<Eigen::Index>(i)).transpose();
      total += 1.0;
    }
    mean /= total;
    Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(d, d), sb = Eigen::MatrixXd::Zero(d, d);
    for (int c = 0; c < classes; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0.0) continue;
      const Vector mu = sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
      sb += counts[static_cast<std::size_t>(c)] * (mu - mean) * (mu - mean).transpose();
      sums[static_cast<std::size_t>(c)] = mu;
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0) continue;
      const Vector r = x.row(static_cast<Eigen::Index>(i)).transpose() - sums[static_cast<std::size_t>(labels[i])];
      sw += r * r.transpose();
    }
    const double scale = std::max(sw.trace() / static_cast<double>(d), 1e-12);
    sw.diagonal().array() += ridge_ * scale;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(sb, sw);
    if (solver.info() != Eigen::Success) throw InvariantError("LDA eigen-solver failed");
    const Eigen::Index keep = std::min<Eigen::Index>(dims_ ? static_cast<Eigen::Index>(dims_) : classes - 1, d);
    LinearMap map;
    map.offset = mean;
    // Eigenvalues ascend; take the last `keep` columns, largest first.
    map.projection = Matrix(d, keep);
    for (Eigen::Index j = 0; j < keep; ++j) map.projection.col(j) = solver.eigenvectors().col(d - 1 - j);
    return map;
  }

 private:
  std::size_t dims_;
  double ridge_;
};

inline std::unique_ptr<FeatureTransform> make_transform(const std::string& name) {
  if (name == "identity") return std::make_unique<IdentityTransform>();
  if (name == "lda") return std::make_unique<LdaTransform>();
  throw UsageError("unknown transform '" + name + "' (expected identity or lda)");
}

struct ClusterModel {
  std::size_t input_dimension = 0;
  LinearMap transform;
  Matrix centroids;                    // n_c × D' in transformed space
  std::vector<double> radius;          // activation radius per cluster
  std::vector<std::size_t> support;    // ‖v^i‖₁
  std::vector<std::vector<PatchRef>> members;
  std::size_t image_count = 0;

  std::size_t size() const { return static_cast<std::size_t>(centroids.rows()); }
};

struct IterationLog {
  std::size_t iteration = 0;
  std::size_t kmeans_clusters = 0;
  std::size_t kmeans_iterations = 0;
  double kmeans_inertia = 0.0;
  std::size_t dropped = 0;
  std::size_t agglomerated = 0;
  std::size_t kept = 0;
  double coverage = 0.0;  // kept support / total support
};

struct DiscoveryResult {
  ClusterModel model;
  std::vector<IterationLog> log;
};

namespace detail {

inline double percentile_nearest_rank(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, v.size());
  return v[rank - 1];
}

}  // namespace detail

// Finalised model from kept member lists over (transformed) points y.
inline ClusterModel build_model(const PatchFeatures& features, const Matrix& y, const LinearMap& map,
                                const std::vector<Members>& kept, const std::vector<std::size_t>& support,
                                double activation_percentile) {
  ClusterModel model;
  model.input_dimension = features.dimension();
  model.transform = map;
  model.image_count = features.image_count();
  model.centroids = Matrix(static_cast<Eigen::Index>(kept.size()), y.cols());
  for (std::size_t c = 0; c < kept.size(); ++c) {
    Vector mu = Vector::Zero(y.cols());
    for (auto i : kept[c]) mu += y.row(i).transpose();
    mu /= static_cast<double>(kept[c].size());
    const auto row = static_cast<Eigen::Index>(c);
    model.centroids.row(row) = mu.transpose();
    std::vector<double> d;
    std::vector<PatchRef> refs;
    for (auto i : kept[c]) {
      d.push_back(std::sqrt(squared_distance(y, i, model.centroids, row)));
      refs.push_back(features.refs[i]);
    }
    model.radius.push_back(detail::percentile_nearest_rank(std::move(d), activation_percentile));
    model.support.push_back(support[c]);
    model.members.push_back(std::move(refs));
  }
  return model;
}

// Outer loop of {transform → kmeans(K_over) → agglomerate(N_c) →
// representativeness filter}. The transform is refit on the original
// features and the previous pass's clusters before every pass but the first.
inline DiscoveryResult discover(const PatchFeatures& features, const DiscoveryConfig& config,
                                const FeatureTransform& transform) {
  require_finite(features);
  if (config.outer_iterations == 0) throw UsageError("outer_iterations must be positive");
  if (config.n_c > config.k_over) throw UsageError("N_c must not exceed K_over");
  if (features.size() == 0) throw DataError("no patch features");
  DiscoveryResult out;
  LinearMap map;
  std::vector<int> labels(features.size(), -1);
  for (std::size_t it = 0; it < config.outer_iterations; ++it) {
    if (it > 0) map = transform.fit(features.x, labels);
    const Matrix y = map.apply(features.x);

    KMeansConfig kc;
    kc.k = config.k_over;
    kc.max_iterations = config.kmeans_max_iterations;
    kc.seed = substream_seed(config.rng_seed, "outer" + std::to_string(it));
    const auto km = kmeans(y, kc);
    const auto over = members_of(km.labels, config.k_over);

    AgglomerateConfig ac;
    ac.target = config.n_c;
    ac.drop_min_size = config.drop_min_size;
    ac.drop_distance_factor = config.drop_distance_factor;
    const auto agg = agglomerate(y, over, ac);

    const auto support = image_support(agg.clusters, features.refs);
    const auto order = representative_prefix(support, config.coverage);
    std::vector<Members> kept;
    std::vector<std::size_t> kept_support;
    for (auto c : order) {
      kept.push_back(agg.clusters[c]);
      kept_support.push_back(support[c]);
    }

    IterationLog log;
    log.iteration = it + 1;
    log.kmeans_clusters = over.size();
    log.kmeans_iterations = km.iterations;
    log.kmeans_inertia = km.inertia();
    log.dropped = agg.dropped.size();
    log.agglomerated = agg.clusters.size();
    log.kept = kept.size();
    std::size_t total = 0, kept_total = 0;
    for (auto s : support) total += s;
    for (auto s : kept_support) kept_total += s;
    log.coverage = total ? static_cast<double>(kept_total) / static_cast<double>(total) : 0.0;
    out.log.push_back(log);

    std::fill(labels.begin(), labels.end(), -1);
    for (std::size_t c = 0; c < kept.size(); ++c) {
      for (auto i : kept[c]) labels[i] = static_cast<int>(c);
    }
    out.model = build_model(features, y, map, kept, kept_support, config.activation_percentile);
  }
  return out;
}

// Bits of one image, patch-major: bit [patch·n_c + c] is set when cluster c
// is the patch's nearest centroid and lies within that cluster's radius.
inline std::vector<std::uint8_t> assign_attributes(const ClusterModel& model, const Matrix& patches) {
  if (static_cast<std::size_t>(patches.cols()) != model.input_dimension) {
    throw DataError("patch features have dimension " + std::to_string(patches.cols()) + ", model expects " +
                    std::to_string(model.input_dimension));
  }
  const std::size_t nc = model.size();
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(patches.rows()) * nc, 0);
  if (nc == 0) return bits;
  const Matrix y = model.transform.apply(patches);
  for (Eigen::Index p = 0; p < y.rows(); ++p) {
    Eigen::Index best = 0;
    double best_d2 = squared_distance(y, p, model.centroids, 0);
    for (Eigen::Index c = 1; c < model.centroids.rows(); ++c) {
      const double d2 = squared_distance(y, p, model.centroids, c);
      if (d2 < best_d2) {
        best = c;
        best_d2 = d2;
      }
    }
    if (std::sqrt(best_d2) <= model.radius[static_cast<std::size_t>(best)]) {
      bits[static_cast<std::size_t>(p) * nc + static_cast<std::size_t>(best)] = 1;
    }
  }
  return bits;
}

// One dataset row per image (first-appearance order), bits from
// assign_attributes followed by the image's semantic bits when given.
inline Dataset attribute_dataset(const ClusterModel& model, const PatchFeatures& features,
                                 const std::unordered_map<std::string, std::int64_t>& likes,
                                 const std::unordered_map<std::string, std::vector<std::uint8_t>>& semantic) {
  Dataset out;
  for (const auto& img : group_by_image(features)) {
    Matrix patches(static_cast<Eigen::Index>(img.rows.size()), features.x.cols());
    for (std::size_t k = 0; k < img.rows.size(); ++k) {
      patches.row(static_cast<Eigen::Index>(k)) = features.x.row(static_cast<Eigen::Index>(img.rows[k]));
    }
    AttributeVector item;
    item.id = img.image_id;
    item.bits = assign_attributes(model, patches);
    if (!semantic.empty()) {
      const auto it = semantic.find(img.image_id);
      if (it == semantic.end()) throw DataError("no semantic attributes for image '" + img.image_id + "'");
      item.bits.insert(item.bits.end(), it->second.begin(), it->second.end());
    }
    if (!likes.empty()) {
      const auto it = likes.find(img.image_id);
      if (it == likes.end()) throw DataError("no like count for image '" + img.image_id + "'");
      item.like_count = it->second;
    }
    out.push_back(std::move(item));
  }
  return out;
}

// ---- model file -------------------------------------------------------------

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

inline Matrix json_matrix(const nlohmann::json& rows, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != cols) throw DataError("ragged matrix in cluster model");
    for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = r[static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace detail

inline std::string model_to_json(const ClusterModel& m) {
  nlohmann::json j;
  j["version"] = 1;
  j["input_dimension"] = m.input_dimension;
  j["image_count"] = m.image_count;
  if (!m.transform.identity()) {
    j["transform"] = {{"offset", std::vector<double>(m.transform.offset.data(),
                                                     m.transform.offset.data() + m.transform.offset.size())},
                      {"projection", detail::matrix_json(m.transform.projection)}};
  }
  j["dimension"] = m.centroids.cols();
  j["centroids"] = detail::matrix_json(m.centroids);
  j["radius"] = m.radius;
  j["support"] = m.support;
  nlohmann::json members = nlohmann::json::array();
  for (const auto& list : m.members) {
    nlohmann::json l = nlohmann::json::array();
    for (const auto& r : list) l.push_back({r.image_id, r.patch_index});
    members.push_back(std::move(l));
  }
  j["members"] = std::move(members);
  return j.dump() + "\n";
}

inline ClusterModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw DataError("unsupported cluster model version");
    ClusterModel m;
    m.input_dimension = j.at("input_dimension").get<std::size_t>();
    m.image_count = j.at("image_count").get<std::size_t>();
    if (j.contains("transform")) {
      const auto off = j["transform"].at("offset").get<std::vector<double>>();
      m.transform.offset = Eigen::Map<const Vector>(off.data(), static_cast<Eigen::Index>(off.size()));
      const auto& proj = j["transform"].at("projection");
      const auto out_dim = proj.empty() ? 0 : static_cast<Eigen::Index>(proj[0].size());
      m.transform.projection = detail::json_matrix(proj, out_dim);
      if (static_cast<std::size_t>(m.transform.projection.rows()) != m.input_dimension ||
          off.size() != m.input_dimension) {
        throw DataError("cluster model transform does not match input_dimension");
      }
    }
    const auto dim = j.at("dimension").get<Eigen::Index>();
    m.centroids = detail::json_matrix(j.at("centroids"), dim);
    m.radius = j.at("radius").get<std::vector<double>>();
    m.support = j.at("support").get<std::vector<std::size_t>>();
    for (const auto& l : j.at("members")) {
      std::vector<PatchRef> refs;
      for (const auto& r : l) refs.push_back({r.at(0).get<std::string>(), r.at(1).get<std::uint32_t>()});
      m.members.push_back(std::move(refs));
    }
    if (m.radius.size() != m.size() || m.support.size() != m.size() || m.members.size() != m.size()) {
      throw DataError("cluster model arrays disagree in length");
    }
    if (static_cast<std::size_t>(dim) != m.transform.output_dimension(m.input_dimension)) {
      throw DataError("cluster model centroid dimension does not match its transform");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed cluster model: ") + e.what());
  }
}

inline void save_model(const std::string& path, const ClusterModel& m) { write_text_file(path, model_to_json(m)); }
inline ClusterModel load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

}  // namespace spnrank::cluster
