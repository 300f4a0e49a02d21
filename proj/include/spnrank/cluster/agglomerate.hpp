#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "spnrank/cluster/features.hpp"
#include "spnrank/error.hpp"
#include "spnrank/parallel.hpp"

namespace spnrank::cluster {

using Members = std::vector<std::uint32_t>;

// Mean Euclidean distance over all cross pairs, by direct double loop.
inline double average_link(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw DataError("average_link: empty cluster");
  if (a.cols() != b.cols()) throw DataError("average_link: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) total += (a.row(i) - b.row(j)).norm();
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

// Same, for two member lists of one point matrix.
inline double average_link(const Matrix& x, const Members& a, const Members& b) {
  if (a.empty() || b.empty()) throw DataError("average_link: empty cluster");
  double total = 0.0;
  for (auto i : a) {
    for (auto j : b) total += (x.row(i) - x.row(j)).norm();
  }
  return total / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

struct AgglomerateConfig {
  std::size_t target = 1000;           // N_c
  std::size_t drop_min_size = 5;
  double drop_distance_factor = 3.0;
  // Cluster pairs with more cross pairs than this use the root mean
  // squared distance from sufficient statistics instead of the exact mean.
  std::size_t exact_pair_limit = 4096;
};

struct Merge {
  std::size_t into = 0;  // surviving slot (the smaller)
  std::size_t from = 0;
  double distance = 0.0;
  friend bool operator==(const Merge&, const Merge&) = default;
};

struct AgglomerateResult {
  std::vector<Members> clusters;                // output clusters, ordered by smallest input slot
  std::vector<std::vector<std::size_t>> origin; // input clusters making up each output
  std::vector<std::size_t> dropped;             // input clusters removed by the drop rule
  std::vector<Merge> merges;                    // in input-slot numbering
};

namespace detail {

// ‖x−y‖ averaged over cross pairs; above the exact limit, sqrt of the mean
// squared distance |A|⁻¹Σ‖x‖² + |B|⁻¹Σ‖y‖² − 2 μ_A·μ_B.
class LinkOracle {
 public:
  LinkOracle(const Matrix& x, const std::vector<Members>& clusters, std::size_t exact_limit)
      : x_(x), clusters_(clusters), exact_limit_(exact_limit) {
    for (const auto& m : clusters) {
      Vector mean = Vector::Zero(x.cols());
      double sq = 0.0;
      for (auto i : m) {
        mean += x.row(i).transpose();
        sq += x.row(i).squaredNorm();
      }
      mean /= static_cast<double>(m.size());
      means_.push_back(std::move(mean));
      mean_sq_.push_back(sq / static_cast<double>(m.size()));
    }
  }

  double operator()(std::size_t a, std::size_t b) const {
    const auto& ma = clusters_[a];
    const auto& mb = clusters_[b];
    if (ma.size() * mb.size() <= exact_limit_) return average_link(x_, ma, mb);
    const double ms = mean_sq_[a] + mean_sq_[b] - 2.0 * means_[a].dot(means_[b]);
    return std::sqrt(std::max(ms, 0.0));
  }

 private:
  const Matrix& x_;
  const std::vector<Members>& clusters_;
  std::size_t exact_limit_;
  std::vector<Vector> means_;
  std::vector<double> mean_sq_;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Average-link agglomeration of `clusters` (member lists into x) down to
// config.target clusters. Before merging, clusters that are both small
// (size < drop_min_size) and far (nearest average link > factor × median
// pairwise link) are dropped. Each step merges the closest pair, lowest
// (i, j) slot pair on ties; links to the merged cluster follow the exact
// Lance-Williams average-link update.
inline AgglomerateResult agglomerate(const Matrix& x, const std::vector<Members>& clusters,
                                     const AgglomerateConfig& config) {
  if (config.target == 0) throw UsageError("N_c must be positive");
  const std::size_t n = clusters.size();
  for (const auto& m : clusters) {
    if (m.empty()) throw DataError("agglomerate: empty input cluster");
  }
  AgglomerateResult res;
  if (n <= config.target) {
    res.clusters = clusters;
    for (std::size_t i = 0; i < n; ++i) res.origin.push_back({i});
    return res;
  }

  // Full link matrix, rows filled in parallel.
  const detail::LinkOracle link(x, clusters, config.exact_pair_limit);
  std::vector<double> dist(n * n, 0.0);
  parallel_chunks(n, std::min<std::size_t>(n, 64), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = link(i, j);
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[j * n + i] = dist[i * n + j];
  }
  auto D = [&](std::size_t i, std::size_t j) -> double& { return dist[i * n + j]; };

  std::vector<char> active(n, 1);
  std::vector<std::size_t> size(n);
  for (std::size_t i = 0; i < n; ++i) size[i] = clusters[i].size();

  std::vector<double> upper;
  upper.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) upper.push_back(D(i, j));
  }
  const double cutoff = config.drop_distance_factor * detail::median(std::move(upper));
  for (std::size_t i = 0; i < n; ++i) {
    if (size[i] >= config.drop_min_size) continue;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) nearest = std::min(nearest, D(i, j));
    }
    if (nearest > cutoff) res.dropped.push_back(i);
  }
  for (auto i : res.dropped) active[i] = 0;
  std::size_t remaining = n - res.dropped.size();
  if (remaining == 0) throw DataError("agglomerate: every cluster was dropped");

  std::vector<std::vector<std::size_t>> origin(n);
  for (std::size_t i = 0; i < n; ++i) origin[i] = {i};

  // nn[i]: nearest active j ≠ i, lowest j on ties.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> nn(n, kNone);
  auto refresh = [&](std::size_t i) {
    nn[i] = kNone;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !active[j]) continue;
      if (nn[i] == kNone || D(i, j) < D(i, nn[i])) nn[i] = j;
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) refresh(i);
  }

  while (remaining > config.target) {
    std::size_t bi = kNone, bj = kNone;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || nn[i] == kNone) continue;
      const std::size_t lo = std::min(i, nn[i]), hi = std::max(i, nn[i]);
      const double d = D(i, nn[i]);
      if (d < best || (d == best && std::pair(lo, hi) < std::pair(bi, bj))) {
        best = d;
        bi = lo;
        bj = hi;
      }
    }
    const double wa = static_cast<double>(size[bi]), wb = static_cast<double>(size[bj]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double merged = (wa * D(bi, k) + wb * D(bj, k)) / (wa + wb);
      D(bi, k) = D(k, bi) = merged;
    }
    active[bj] = 0;
    size[bi] += size[bj];
    origin[bi].insert(origin[bi].end(), origin[bj].begin(), origin[bj].end());
    res.merges.push_back({bi, bj, best});
    --remaining;

    refresh(bi);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi) continue;
      if (nn[k] == bi || nn[k] == bj) {
        refresh(k);
      } else if (D(k, bi) < D(k, nn[k]) || (D(k, bi) == D(k, nn[k]) && bi < nn[k])) {
        nn[k] = bi;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    std::sort(origin[i].begin(), origin[i].end());
    Members m;
    for (auto o : origin[i]) m.insert(m.end(), clusters[o].begin(), clusters[o].end());
    std::sort(m.begin(), m.end());
    res.clusters.push_back(std::move(m));
    res.origin.push_back(std::move(origin[i]));
  }
  return res;
}

// ‖v^i‖₁: number of distinct images with at least one patch in each cluster.
inline std::vector<std::size_t> image_support(const std::vector<Members>& clusters, const std::vector<PatchRef>& refs) {
  std::vector<std::size_t> out;
  std::vector<std::string> ids;
  for (const auto& m : clusters) {
    ids.clear();
    for (auto i : m) ids.push_back(refs[i].image_id);
    std::sort(ids.begin(), ids.end());
    out.push_back(static_cast<std::size_t>(std::unique(ids.begin(), ids.end()) - ids.begin()));
  }
  return out;
}

// Indices of the most representative clusters: sorted by support,
// descending (stable, so lower index first on equal support), the shortest
// prefix whose support sum reaches coverage × total. Returned in that order.
inline std::vector<std::size_t> representative_prefix(const std::vector<std::size_t>& support, double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0)) throw UsageError("coverage must be in (0, 1]");
  std::vector<std::size_t> order(support.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return support[a] > support[b]; });
  const double total = static_cast<double>(std::accumulate(support.begin(), support.end(), std::size_t{0}));
  // Relative slack so that e.g. 9 of 10 equal clusters meets 0.9 exactly.
  const double need = coverage * total * (1.0 - 1e-12);
  std::vector<std::size_t> kept;
  double sum = 0.0;
  for (auto i : order) {
    if (sum >= need && !kept.empty()) break;
    kept.push_back(i);
    sum += static_cast<double>(support[i]);
  }
  return kept;
}

}  // namespace spnrank::cluster
