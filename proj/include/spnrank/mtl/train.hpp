#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spnrank/error.hpp"
#include "spnrank/mtl/model.hpp"
#include "spnrank/random.hpp"

namespace spnrank::mtl {

struct SolverConfig {
  std::size_t latent = 0;             // K; 0 means min(d, 2M)
  std::size_t max_outer = 200;
  double tol = 1e-6;                  // relative objective decrease
  std::size_t inner_steps = 5;        // proximal steps per block per outer iteration
  double initial_step = 1.0;
  double backtrack = 0.5;
  std::size_t max_backtracks = 60;
  double init_ridge = 1e-3;           // ridge for the single-task warm start
  std::uint64_t seed = 0;
};

struct IterationLog {
  std::size_t iteration = 0;
  Objective objective;
  double step_s = 0.0;
  double step_l = 0.0;
  std::size_t rejected = 0;  // block updates undone by the monotone guard
};

using Observer = std::function<void(const IterationLog&, const Model&)>;

struct TrainResult {
  Model model;
  std::vector<IterationLog> history;  // entry 0 is the initial point
  bool converged = false;
};

// Squared-hinge ridge for one task: minimises ½Σmax(0, 1 − y wᵀx)² + ρ‖w‖²
// by damped generalised Newton (active-set Hessian, halving line search).
inline Vector single_task_weights(const Task& t, double ridge, std::size_t max_iterations = 100) {
  const auto d = t.x.cols();
  auto value = [&](const Vector& w) { return task_hinge(t, w) + ridge * w.squaredNorm(); };
  Vector w = Vector::Zero(d);
  double fw = value(w);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const Vector margin = t.y.cwiseProduct(t.x * w);
    Matrix H = 2.0 * ridge * Matrix::Identity(d, d);
    Vector g = 2.0 * ridge * w;
    for (Eigen::Index i = 0; i < t.x.rows(); ++i) {
      if (margin[i] >= 1.0) continue;
      const auto row = t.x.row(i).transpose();
      H.noalias() += row * row.transpose();
      g -= (1.0 - margin[i]) * t.y[i] * row;
    }
    if (g.norm() <= 1e-12 * std::max(1.0, fw)) break;
    const Vector dir = H.ldlt().solve(g);
    double a = 1.0;
    Vector next = w - dir;
    double fn = value(next);
    while (fn > fw - 1e-4 * a * g.dot(dir) && a > 1e-10) {
      a *= 0.5;
      next = w - a * dir;
      fn = value(next);
    }
    if (fn >= fw) break;
    w = next;
    fw = fn;
  }
  return w;
}

// L = top-K left singular vectors of the stacked single-task weights, S the
// projections onto them. Latent columns beyond the rank get small seeded
// noise in L and zero rows in S.
inline Model initial_model(const TrainSet& data, const TaskGroups& groups, const Hyper& hyper, const SolverConfig& cfg) {
  const std::size_t d = feature_dimension(data);
  const std::size_t m = data.size();
  const std::size_t k = cfg.latent ? cfg.latent : std::min(d, 2 * m);
  Matrix W0(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  for (std::size_t t = 0; t < m; ++t) W0.col(static_cast<Eigen::Index>(t)) = single_task_weights(data[t], cfg.init_ridge);
  Eigen::JacobiSVD<Matrix> svd(W0, Eigen::ComputeThinU);
  const auto& U = svd.matrixU();
  const auto r = std::min<Eigen::Index>(U.cols(), static_cast<Eigen::Index>(k));
  Model model;
  model.hyper = hyper;
  model.groups = groups;
  model.L = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
  model.L.leftCols(r) = U.leftCols(r);
  Rng rng(cfg.seed, "mtl-init");
  for (Eigen::Index c = r; c < model.L.cols(); ++c) {
    for (Eigen::Index i = 0; i < model.L.rows(); ++i) model.L(i, c) = 1e-3 * rng.normal();
  }
  model.S = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m));
  model.S.topRows(r) = U.leftCols(r).transpose() * W0;
  return model;
}

namespace detail {

// One backtracking proximal gradient step on the block x with smooth part f
// and prox operator prox(v, t). Returns the accepted point, or x itself if
// no step passed the sufficient-decrease test.
template <typename F, typename Grad, typename Prox>
Matrix prox_step(const Matrix& x, double& step, const SolverConfig& cfg, F&& f, Grad&& grad, Prox&& prox) {
  const double fx = f(x);
  const Matrix g = grad(x);
  double t = step;
  for (std::size_t b = 0; b <= cfg.max_backtracks; ++b, t *= cfg.backtrack) {
    const Matrix z = prox(x - t * g, t);
    const Matrix diff = z - x;
    const double bound = fx + (g.array() * diff.array()).sum() + diff.squaredNorm() / (2.0 * t);
    if (f(z) <= bound) {
      step = t / cfg.backtrack;  // allow the next step to grow
      return z;
    }
  }
  step = t;
  return x;
}

}  // namespace detail

// Alternating proximal gradient on the composite objective. Each outer
// iteration runs inner_steps on S (L fixed) and then on L (S fixed). A block
// update that raises the full objective is undone, so the logged objective
// never increases.
inline TrainResult train(const TrainSet& data, const TaskGroups& groups, const Hyper& hyper, const SolverConfig& cfg,
                         const std::optional<Model>& warm_start = std::nullopt, const Observer& observer = {}) {
  groups.validate();
  if (groups.tasks != data.size()) {
    throw DataError("group spec covers " + std::to_string(groups.tasks) + " tasks, data has " + std::to_string(data.size()));
  }
  for (std::size_t m = 0; m < data.size(); ++m) {
    if (data[m].size() == 0) throw DataError("task " + std::to_string(m) + " has no examples");
  }
  if (!(hyper.mu >= 0 && hyper.gamma >= 0 && hyper.lambda >= 0)) throw UsageError("mu, gamma and lambda must be non-negative");
  if (!(cfg.backtrack > 0 && cfg.backtrack < 1) || !(cfg.initial_step > 0) || !(cfg.tol >= 0)) {
    throw UsageError("invalid solver configuration");
  }

  TrainResult res;
  res.model = warm_start ? *warm_start : initial_model(data, groups, hyper, cfg);
  res.model.hyper = hyper;
  res.model.groups = groups;
  check_shapes(res.model, data);

  auto full = [&](const Model& m, std::size_t it) {
    const auto o = objective(m, data);
    if (!std::isfinite(o.total())) throw InvariantError("non-finite objective at iteration " + std::to_string(it));
    return o;
  };

  IterationLog log;
  log.objective = full(res.model, 0);
  res.history.push_back(log);
  if (observer) observer(log, res.model);

  double step_s = cfg.initial_step, step_l = cfg.initial_step;
  for (std::size_t it = 1; it <= cfg.max_outer; ++it) {
    const double before = res.history.back().objective.total();
    Model& m = res.model;
    std::size_t rejected = 0;

    {
      const Model saved = m;
      const Matrix& L = m.L;
      for (std::size_t s = 0; s < cfg.inner_steps; ++s) {
        m.S = detail::prox_step(
            m.S, step_s, cfg, [&](const Matrix& S) { return hinge_term(L * S, data); },
            [&](const Matrix& S) { return Matrix(L.transpose() * hinge_gradient(L * S, data)); },
            [&](const Matrix& v, double t) { return group_soft_threshold(v, groups, t * hyper.mu); });
      }
      if (full(m, it).total() > full(saved, it).total()) {
        m = saved;
        ++rejected;
      }
    }
    {
      const Model saved = m;
      const Matrix& S = m.S;
      for (std::size_t s = 0; s < cfg.inner_steps; ++s) {
        m.L = detail::prox_step(
            m.L, step_l, cfg, [&](const Matrix& L) { return hinge_term(L * S, data); },
            [&](const Matrix& L) { return Matrix(hinge_gradient(L * S, data) * S.transpose()); },
            [&](const Matrix& v, double t) { return elastic_net_prox(v, t, hyper.gamma, hyper.lambda); });
      }
      if (full(m, it).total() > full(saved, it).total()) {
        m = saved;
        ++rejected;
      }
    }

    log.iteration = it;
    log.objective = full(m, it);
    log.step_s = step_s;
    log.step_l = step_l;
    log.rejected = rejected;
    if (log.objective.total() > before) {
      throw InvariantError("objective increased at iteration " + std::to_string(it));
    }
    res.history.push_back(log);
    if (observer) observer(log, m);

    const double after = log.objective.total();
    if (before <= 0.0 || (before - after) <= cfg.tol * std::abs(before)) {
      res.converged = true;
      break;
    }
  }
  res.model.validate();
  return res;
}

}  // namespace spnrank::mtl
