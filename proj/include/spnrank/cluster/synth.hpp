#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spnrank/cluster/features.hpp"
#include "spnrank/error.hpp"
#include "spnrank/random.hpp"

namespace spnrank::synth {

struct LabeledPatches {
  cluster::PatchFeatures features;
  std::vector<int> labels;
  cluster::Matrix centers;
};

struct PatternParams {
  std::size_t patterns = 8;
  std::size_t images = 200;
  std::size_t patches_per_image = 12;
  std::size_t dimension = 16;
  double separation = 10.0;  // std-dev of the pattern centres
  double noise = 1.0;        // per-coordinate std-dev around a centre
  std::uint64_t seed = 7;
};

// Every patch of every image shows one of `patterns` prototypes, chosen
// uniformly; its feature is the prototype plus isotropic Gaussian noise.
// Labels are the prototype indices.
inline LabeledPatches pattern_patches(const PatternParams& p) {
  if (p.patterns == 0 || p.images == 0 || p.patches_per_image == 0 || p.dimension == 0) {
    throw UsageError("pattern generator needs positive sizes");
  }
  Rng rng(p.seed, "patterns");
  LabeledPatches out;
  out.centers = cluster::Matrix(static_cast<Eigen::Index>(p.patterns), static_cast<Eigen::Index>(p.dimension));
  for (Eigen::Index i = 0; i < out.centers.size(); ++i) out.centers.data()[i] = p.separation * rng.normal();
  const std::size_t n = p.images * p.patches_per_image;
  out.features.x = cluster::Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p.dimension));
  for (std::size_t img = 0; img < p.images; ++img) {
    for (std::size_t k = 0; k < p.patches_per_image; ++k) {
      const std::size_t row = img * p.patches_per_image + k;
      const auto label = static_cast<int>(rng.below(p.patterns));
      out.labels.push_back(label);
      out.features.refs.push_back({"img" + std::to_string(img), static_cast<std::uint32_t>(k)});
      for (std::size_t j = 0; j < p.dimension; ++j) {
        out.features.x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) =
            out.centers(label, static_cast<Eigen::Index>(j)) + p.noise * rng.normal();
      }
    }
  }
  return out;
}

struct BlobParams {
  std::size_t blobs = 3;
  std::size_t points_per_blob = 100;
  std::size_t dimension = 2;
  double separation = 20.0;
  double noise = 1.0;
  std::uint64_t seed = 7;
};

// Isotropic Gaussian blobs; each point is its own one-patch image.
inline LabeledPatches blobs(const BlobParams& p) {
  Rng rng(p.seed, "blobs");
  LabeledPatches out;
  out.centers = cluster::Matrix(static_cast<Eigen::Index>(p.blobs), static_cast<Eigen::Index>(p.dimension));
  for (Eigen::Index i = 0; i < out.centers.size(); ++i) out.centers.data()[i] = p.separation * rng.normal();
  const std::size_t n = p.blobs * p.points_per_blob;
  out.features.x = cluster::Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p.dimension));
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<int>(i % p.blobs);
    out.labels.push_back(label);
    out.features.refs.push_back({"pt" + std::to_string(i), 0});
    for (std::size_t j = 0; j < p.dimension; ++j) {
      out.features.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          out.centers(label, static_cast<Eigen::Index>(j)) + p.noise * rng.normal();
    }
  }
  return out;
}

}  // namespace spnrank::synth
