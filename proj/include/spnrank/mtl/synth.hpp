#pragma once

#include <cstdint>

#include "spnrank/error.hpp"
#include "spnrank/mtl/model.hpp"
#include "spnrank/random.hpp"

namespace spnrank::mtl {

struct PlantedParams {
  std::size_t dimension = 20;
  std::size_t latent = 3;
  std::size_t tasks = 6;
  std::size_t groups = 2;  // tasks dealt round-robin into this many groups
  std::size_t train_per_task = 500;
  std::size_t test_per_task = 200;
  double label_noise = 0.0;  // probability of flipping a label
  std::uint64_t seed = 7;
};

struct Planted {
  TrainSet train;
  TrainSet test;
  TaskGroups groups;
  Matrix L;
  Matrix S;
};

// Gaussian features, labels y = sign(xᵀ L* s*_m) from a random planted
// factorisation, optionally flipped with probability label_noise.
inline Planted planted(const PlantedParams& p) {
  if (p.dimension == 0 || p.latent == 0 || p.tasks == 0 || p.groups == 0 || p.groups > p.tasks) {
    throw UsageError("planted: dimension, latent and tasks must be positive and 1 <= groups <= tasks");
  }
  if (!(p.label_noise >= 0.0 && p.label_noise < 0.5)) throw UsageError("planted: label_noise must be in [0, 0.5)");
  Rng rng(p.seed, "planted-mtl");
  const auto d = static_cast<Eigen::Index>(p.dimension);
  Planted out;
  out.L = Matrix(d, static_cast<Eigen::Index>(p.latent));
  out.S = Matrix(static_cast<Eigen::Index>(p.latent), static_cast<Eigen::Index>(p.tasks));
  for (Eigen::Index i = 0; i < out.L.size(); ++i) out.L.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < out.S.size(); ++i) out.S.data()[i] = rng.normal();
  const Matrix W = out.L * out.S;

  auto draw = [&](std::size_t n, std::size_t m) {
    Task t;
    t.x = Examples(static_cast<Eigen::Index>(n), d);
    t.y = Vector(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < t.x.rows(); ++i) {
      for (Eigen::Index j = 0; j < d; ++j) t.x(i, j) = rng.normal();
      double y = t.x.row(i).dot(W.col(static_cast<Eigen::Index>(m))) < 0.0 ? -1.0 : 1.0;
      if (p.label_noise > 0.0 && rng.uniform() < p.label_noise) y = -y;
      t.y[i] = y;
    }
    return t;
  };
  for (std::size_t m = 0; m < p.tasks; ++m) out.train.push_back(draw(p.train_per_task, m));
  for (std::size_t m = 0; m < p.tasks; ++m) out.test.push_back(draw(p.test_per_task, m));
  out.groups.tasks = p.tasks;
  out.groups.groups.resize(p.groups);
  for (std::size_t m = 0; m < p.tasks; ++m) out.groups.groups[m % p.groups].push_back(m);
  return out;
}

}  // namespace spnrank::mtl
