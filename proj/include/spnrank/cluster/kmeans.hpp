#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "spnrank/cluster/features.hpp"
#include "spnrank/error.hpp"
#include "spnrank/parallel.hpp"
#include "spnrank/random.hpp"

namespace spnrank::cluster {

struct KMeansConfig {
  std::size_t k = 2000;
  std::size_t max_iterations = 100;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Matrix centroids;                     // k × D
  std::vector<std::uint32_t> labels;    // one per point
  std::vector<double> inertia_history;  // Σ squared distance after each assignment step
  std::size_t iterations = 0;
  bool converged = false;

  double inertia() const { return inertia_history.empty() ? 0.0 : inertia_history.back(); }
};

namespace detail {

struct Assignment {
  std::size_t changes = 0;
  double inertia = 0.0;
};

// Nearest centroid per point (lowest index on ties) and its squared distance.
inline Assignment assign_points(const Matrix& x, const Matrix& centroids, std::vector<std::uint32_t>& labels,
                                std::vector<double>& dist2) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(n, 64));
  std::vector<std::size_t> changes(chunks, 0);
  std::vector<double> inertia(chunks, 0.0);
  parallel_chunks(n, chunks, [&](std::size_t c, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = x.row(static_cast<Eigen::Index>(i));
      const Vector d = (centroids.rowwise() - row).rowwise().squaredNorm();
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < d.size(); ++j) {
        if (d[j] < d[best]) best = j;
      }
      const auto label = static_cast<std::uint32_t>(best);
      if (labels[i] != label) ++changes[c];
      labels[i] = label;
      dist2[i] = d[best];
      inertia[c] += d[best];
    }
  });
  Assignment a;
  for (std::size_t c = 0; c < chunks; ++c) {
    a.changes += changes[c];
    a.inertia += inertia[c];
  }
  return a;
}

// k-means++: first centre uniform, then each next centre drawn with
// probability proportional to squared distance from the nearest chosen one.
// Falls back to uniform choice among unchosen points when every remaining
// distance is zero.
inline Matrix plus_plus_seed(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  Matrix centroids(static_cast<Eigen::Index>(k), x.cols());
  std::vector<char> chosen(n, 0);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += d2[i];
      if (total > 0.0) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          acc += d2[i];
          pick = i;
          if (acc > u) break;
        }
      } else {
        std::size_t remaining = 0;
        for (char ch : chosen) remaining += !ch;
        std::size_t r = rng.below(remaining);
        for (pick = 0; pick < n; ++pick) {
          if (!chosen[pick] && r-- == 0) break;
        }
      }
    }
    chosen[pick] = 1;
    centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    const auto cen = centroids.row(static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - cen).squaredNorm());
    }
  }
  return centroids;
}

}  // namespace detail

// Lloyd iteration from k-means++ seeds. Stops when no assignment changes or
// after max_iterations updates. A centroid left without points is moved to
// the point currently farthest from its own centroid.
inline KMeansResult kmeans(const Matrix& x, const KMeansConfig& config) {
  const std::size_t n = static_cast<std::size_t>(x.rows());
  if (config.k == 0) throw UsageError("K must be positive");
  if (n < config.k) {
    throw DataError("fewer points (" + std::to_string(n) + ") than K (" + std::to_string(config.k) + ")");
  }
  if (!x.allFinite()) throw DataError("kmeans: non-finite feature value");
  Rng rng(config.seed, "kmeans");
  KMeansResult res;
  res.centroids = detail::plus_plus_seed(x, config.k, rng);
  res.labels.assign(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<double> dist2(n, 0.0);
  std::vector<std::size_t> counts(config.k);

  while (true) {
    const auto a = detail::assign_points(x, res.centroids, res.labels, dist2);
    res.inertia_history.push_back(a.inertia);
    if (a.changes == 0) {
      res.converged = true;
      break;
    }
    if (res.iterations == config.max_iterations) break;
    ++res.iterations;

    res.centroids.setZero();
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      res.centroids.row(res.labels[i]) += x.row(static_cast<Eigen::Index>(i));
      ++counts[res.labels[i]];
    }
    std::vector<char> taken(n, 0);
    for (std::size_t c = 0; c < config.k; ++c) {
      const auto row = static_cast<Eigen::Index>(c);
      if (counts[c] > 0) {
        res.centroids.row(row) /= static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i] && (far == n || dist2[i] > dist2[far])) far = i;
      }
      taken[far] = 1;
      res.centroids.row(row) = x.row(static_cast<Eigen::Index>(far));
    }
  }
  return res;
}

// Member lists of each label, empty clusters omitted.
inline std::vector<std::vector<std::uint32_t>> members_of(const std::vector<std::uint32_t>& labels, std::size_t k) {
  std::vector<std::vector<std::uint32_t>> out(k);
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(static_cast<std::uint32_t>(i));
  std::erase_if(out, [](const auto& m) { return m.empty(); });
  return out;
}

}  // namespace spnrank::cluster
