#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spnrank/error.hpp"
#include "spnrank/parallel.hpp"

namespace spnrank::mtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Examples = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Partition of the M task indices into groups.
struct TaskGroups {
  std::size_t tasks = 0;
  std::vector<std::vector<std::size_t>> groups;

  static TaskGroups single(std::size_t m) {
    TaskGroups g;
    g.tasks = m;
    g.groups.emplace_back();
    for (std::size_t i = 0; i < m; ++i) g.groups[0].push_back(i);
    return g;
  }

  void validate() const {
    if (groups.empty()) throw UsageError("task groups: at least one group required");
    std::vector<char> seen(tasks, 0);
    for (const auto& g : groups) {
      if (g.empty()) throw UsageError("task groups: empty group");
      for (auto t : g) {
        if (t >= tasks) throw UsageError("task groups: index " + std::to_string(t) + " out of range for " + std::to_string(tasks) + " tasks");
        if (seen[t]) throw UsageError("task groups: task " + std::to_string(t) + " listed twice");
        seen[t] = 1;
      }
    }
    for (std::size_t t = 0; t < tasks; ++t) {
      if (!seen[t]) throw UsageError("task groups: task " + std::to_string(t) + " is in no group");
    }
  }
};

struct Hyper {
  double mu = 0.1;       // group sparsity on S
  double gamma = 0.01;   // l1 on L
  double lambda = 0.01;  // squared Frobenius on L
};

// One attribute task: rows of x are examples, y holds ±1 labels.
struct Task {
  Examples x;
  Vector y;
  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

using TrainSet = std::vector<Task>;

inline std::size_t feature_dimension(const TrainSet& data) {
  if (data.empty()) throw DataError("no tasks");
  const auto d = static_cast<std::size_t>(data[0].x.cols());
  for (std::size_t m = 0; m < data.size(); ++m) {
    const auto& t = data[m];
    if (static_cast<std::size_t>(t.x.cols()) != d) {
      throw DataError("task " + std::to_string(m) + " has " + std::to_string(t.x.cols()) + " features, expected " + std::to_string(d));
    }
    if (t.x.rows() != t.y.size()) throw DataError("task " + std::to_string(m) + ": label count differs from row count");
    for (Eigen::Index i = 0; i < t.y.size(); ++i) {
      if (t.y[i] != 1.0 && t.y[i] != -1.0) throw DataError("task " + std::to_string(m) + ": labels must be -1 or +1");
    }
  }
  return d;
}

// W = L S: L is d × K, S is K × M, column m of W is task m's weight vector.
struct Model {
  Matrix L;
  Matrix S;
  Hyper hyper;
  TaskGroups groups;

  std::size_t dimension() const { return static_cast<std::size_t>(L.rows()); }
  std::size_t latent() const { return static_cast<std::size_t>(L.cols()); }
  std::size_t tasks() const { return static_cast<std::size_t>(S.cols()); }
  Matrix weights() const { return L * S; }

  void validate() const {
    if (L.cols() != S.rows()) throw InvariantError("model: L has " + std::to_string(L.cols()) + " columns but S has " + std::to_string(S.rows()) + " rows");
    if (!L.allFinite() || !S.allFinite()) throw InvariantError("model: non-finite entry");
    if (groups.tasks != tasks()) throw InvariantError("model: group spec covers " + std::to_string(groups.tasks) + " tasks, S has " + std::to_string(tasks()));
    groups.validate();
  }
};

struct Objective {
  double hinge = 0.0;
  double group = 0.0;
  double l1 = 0.0;
  double ridge = 0.0;
  double total() const { return hinge + group + l1 + ridge; }
};

// ½ Σ max(0, 1 − y·wᵀx)² for one task.
inline double task_hinge(const Task& t, const Vector& w) {
  const Vector r = (1.0 - t.y.cwiseProduct(t.x * w).array()).max(0.0).matrix();
  return 0.5 * r.squaredNorm();
}

// Σ_k Σ_g ‖S(k, g)‖₂.
inline double group_norm(const Matrix& S, const TaskGroups& groups) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < S.rows(); ++k) {
    for (const auto& g : groups.groups) {
      double s = 0.0;
      for (auto m : g) s += S(k, static_cast<Eigen::Index>(m)) * S(k, static_cast<Eigen::Index>(m));
      total += std::sqrt(s);
    }
  }
  return total;
}

inline void check_shapes(const Model& model, const TrainSet& data) {
  if (data.size() != model.tasks()) {
    throw DataError("model has " + std::to_string(model.tasks()) + " tasks, data has " + std::to_string(data.size()));
  }
  if (feature_dimension(data) != model.dimension()) {
    throw DataError("model expects " + std::to_string(model.dimension()) + " features, data has " + std::to_string(feature_dimension(data)));
  }
  if (model.L.cols() != model.S.rows()) throw DataError("L and S inner dimensions differ");
}

// Summed hinge over tasks given W; tasks evaluated in parallel, summed in order.
inline double hinge_term(const Matrix& W, const TrainSet& data) {
  std::vector<double> per(data.size(), 0.0);
  parallel_chunks(data.size(), data.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t m = b; m < e; ++m) per[m] = task_hinge(data[m], W.col(static_cast<Eigen::Index>(m)));
  });
  double total = 0.0;
  for (double v : per) total += v;
  return total;
}

inline Objective objective(const Model& model, const TrainSet& data) {
  check_shapes(model, data);
  Objective o;
  o.hinge = hinge_term(model.weights(), data);
  o.group = model.hyper.mu * group_norm(model.S, model.groups);
  o.l1 = model.hyper.gamma * model.L.cwiseAbs().sum();
  o.ridge = model.hyper.lambda * model.L.squaredNorm();
  return o;
}

// ∂hinge/∂W, one column per task.
inline Matrix hinge_gradient(const Matrix& W, const TrainSet& data) {
  Matrix G(W.rows(), W.cols());
  parallel_chunks(data.size(), data.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t m = b; m < e; ++m) {
      const auto& t = data[m];
      const auto col = static_cast<Eigen::Index>(m);
      const Vector r = (1.0 - t.y.cwiseProduct(t.x * W.col(col)).array()).max(0.0).matrix();
      G.col(col) = -(t.x.transpose() * r.cwiseProduct(t.y));
    }
  });
  return G;
}

// prox of t·μ Σ_k Σ_g ‖S(k, g)‖₂: each row-within-group shrinks toward zero
// by min(norm, t·μ).
inline Matrix group_soft_threshold(const Matrix& S, const TaskGroups& groups, double threshold) {
  Matrix out = S;
  for (Eigen::Index k = 0; k < S.rows(); ++k) {
    for (const auto& g : groups.groups) {
      double s = 0.0;
      for (auto m : g) s += S(k, static_cast<Eigen::Index>(m)) * S(k, static_cast<Eigen::Index>(m));
      const double norm = std::sqrt(s);
      const double scale = norm > threshold ? 1.0 - threshold / norm : 0.0;
      for (auto m : g) out(k, static_cast<Eigen::Index>(m)) *= scale;
    }
  }
  return out;
}

// prox of t·(γ‖L‖₁ + λ‖L‖_F²): entrywise soft threshold, then ridge shrink.
inline Matrix elastic_net_prox(const Matrix& L, double t, double gamma, double lambda) {
  const double shrink = 1.0 / (1.0 + 2.0 * t * lambda);
  return L.unaryExpr([&](double v) {
    const double a = std::abs(v) - t * gamma;
    return a > 0.0 ? std::copysign(a, v) * shrink : 0.0;
  });
}

struct Prediction {
  int label = 1;
  double margin = 0.0;
  bool tie = false;
};

inline Prediction predict(const Model& model, const Eigen::Ref<const Vector>& x, std::size_t task) {
  if (static_cast<std::size_t>(x.size()) != model.dimension()) {
    throw DataError("feature vector has " + std::to_string(x.size()) + " entries, model expects " + std::to_string(model.dimension()));
  }
  if (task >= model.tasks()) throw UsageError("task " + std::to_string(task) + " out of range");
  const Vector w = model.L * model.S.col(static_cast<Eigen::Index>(task));
  Prediction p;
  p.margin = w.dot(x);
  p.tie = p.margin == 0.0;
  p.label = p.margin < 0.0 ? -1 : 1;
  return p;
}

// Fraction of examples whose predicted label matches, per task.
inline std::vector<double> task_accuracy(const Model& model, const TrainSet& data) {
  check_shapes(model, data);
  std::vector<double> out;
  for (std::size_t m = 0; m < data.size(); ++m) {
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < data[m].x.rows(); ++i) {
      correct += predict(model, data[m].x.row(i).transpose(), m).label == static_cast<int>(data[m].y[i]);
    }
    out.push_back(data[m].size() ? static_cast<double>(correct) / static_cast<double>(data[m].size()) : 0.0);
  }
  return out;
}

inline double mean_accuracy(const Model& model, const TrainSet& data) {
  std::size_t correct = 0, total = 0;
  const auto acc = task_accuracy(model, data);
  for (std::size_t m = 0; m < data.size(); ++m) {
    correct += static_cast<std::size_t>(std::llround(acc[m] * static_cast<double>(data[m].size())));
    total += data[m].size();
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace spnrank::mtl
