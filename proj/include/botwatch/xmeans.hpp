#pragma once

// K-means and X-means (k-means with BIC-driven centroid splitting).
//
// BIC for K identical spherical Gaussians over R points in M dimensions:
//   sigma^2 = SSE / (R - K)                                 (floored at 1e-9)
//   l       = sum_n R_n log R_n - R log R
//             - R/2 log(2 pi) - R M/2 log sigma^2 - (R - K)/2
//   p       = (K - 1) + M K + 1
//   BIC     = l - p/2 log R

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace botwatch {

template <std::size_t D>
using Point = std::array<double, D>;

inline constexpr double kVarianceFloor = 1e-9;

template <std::size_t D>
double squared_distance(const Point<D>& a, const Point<D>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < D; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

template <std::size_t D>
std::size_t nearest(const Point<D>& p, std::span<const Point<D>> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace detail {

// Portable draws: libstdc++ and libc++ distributions differ, raw engine
// output does not.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

template <std::size_t D>
struct KMeansResult {
  std::vector<Point<D>> centroids;
  std::vector<std::size_t> labels;
};

// k-means++ seeding. Returns fewer than k centroids when the points have
// fewer than k distinct positions.
template <std::size_t D>
std::vector<Point<D>> kmeanspp_seed(std::span<const Point<D>> pts, std::size_t k,
                                    std::mt19937_64& rng) {
  std::vector<Point<D>> centroids;
  if (pts.empty() || k == 0) return centroids;
  centroids.push_back(pts[rng() % pts.size()]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = squared_distance(pts[i], centroids[0]);
  while (centroids.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (total <= 0.0) break;
    double target = detail::uniform01(rng) * total;
    std::size_t pick = pts.size() - 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      target -= d2[i];
      if (target < 0.0 && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
    centroids.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i)
      d2[i] = std::min(d2[i], squared_distance(pts[i], centroids.back()));
  }
  return centroids;
}

// Lloyd iterations until assignments are stable or `max_iter` is reached.
// Centroids that lose all their points are dropped.
template <std::size_t D>
KMeansResult<D> kmeans(std::span<const Point<D>> pts, std::vector<Point<D>> centroids,
                       int max_iter = 100) {
  KMeansResult<D> r;
  r.labels.assign(pts.size(), std::numeric_limits<std::size_t>::max());
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto c = nearest<D>(pts[i], centroids);
      if (c != r.labels[i]) {
        r.labels[i] = c;
        changed = true;
      }
    }
    std::vector<Point<D>> sums(centroids.size(), Point<D>{});
    std::vector<std::size_t> counts(centroids.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto c = r.labels[i];
      ++counts[c];
      for (std::size_t d = 0; d < D; ++d) sums[c][d] += pts[i][d];
    }
    std::vector<Point<D>> next;
    std::vector<std::size_t> remap(centroids.size());
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[c] == 0) continue;
      remap[c] = next.size();
      for (std::size_t d = 0; d < D; ++d) sums[c][d] /= static_cast<double>(counts[c]);
      next.push_back(sums[c]);
    }
    if (next.size() != centroids.size()) {
      for (auto& l : r.labels) l = remap[l];
      changed = true;
    }
    centroids = std::move(next);
    if (!changed) break;
  }
  r.centroids = std::move(centroids);
  return r;
}

template <std::size_t D>
double bic(std::span<const Point<D>> pts, std::span<const std::size_t> labels,
           std::span<const Point<D>> centroids) {
  const double R = static_cast<double>(pts.size());
  const double K = static_cast<double>(centroids.size());
  const double M = static_cast<double>(D);
  std::vector<double> sizes(centroids.size(), 0.0);
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    sizes[labels[i]] += 1.0;
    sse += squared_distance(pts[i], centroids[labels[i]]);
  }
  double variance = R > K ? sse / (R - K) : 0.0;
  variance = std::max(variance, kVarianceFloor);

  double loglik = 0.0;
  for (double n : sizes) {
    if (n > 0.0) loglik += n * std::log(n);
  }
  loglik -= R * std::log(R);
  loglik -= R / 2.0 * std::log(2.0 * std::numbers::pi);
  loglik -= R * M / 2.0 * std::log(variance);
  loglik -= (R - K) / 2.0;

  double params = (K - 1.0) + M * K + 1.0;
  return loglik - params / 2.0 * std::log(R);
}

// Points are assigned to their nearest centroid.
template <std::size_t D>
double bic(std::span<const Point<D>> pts, std::span<const Point<D>> centroids) {
  std::vector<std::size_t> labels(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) labels[i] = nearest<D>(pts[i], centroids);
  return bic<D>(pts, labels, centroids);
}

template <std::size_t D>
struct XMeansResult {
  std::size_t k = 0;
  std::vector<std::size_t> labels;
  std::vector<Point<D>> centroids;
};

// Starts from one centroid and alternates global k-means with a split pass:
// each region is split in two by a local 2-means and the split is kept when
// the children's BIC beats the parent's on that region. Stops when no split
// is accepted or k_max centroids exist.
template <std::size_t D>
XMeansResult<D> xmeans(std::span<const Point<D>> pts, std::size_t k_max, std::uint64_t seed) {
  XMeansResult<D> out;
  if (pts.empty()) return out;
  k_max = std::max<std::size_t>(k_max, 1);
  std::mt19937_64 rng(seed);

  Point<D> mean{};
  for (const auto& p : pts)
    for (std::size_t d = 0; d < D; ++d) mean[d] += p[d] / static_cast<double>(pts.size());
  auto state = kmeans<D>(pts, {mean});

  while (state.centroids.size() < k_max) {
    struct Split {
      std::size_t parent;
      std::vector<Point<D>> children;
      double gain;
    };
    std::vector<Split> splits;
    for (std::size_t c = 0; c < state.centroids.size(); ++c) {
      std::vector<Point<D>> region;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (state.labels[i] == c) region.push_back(pts[i]);
      if (region.size() < 2) continue;
      auto seeds = kmeanspp_seed<D>(region, 2, rng);
      if (seeds.size() < 2) continue;
      auto local = kmeans<D>(region, seeds);
      if (local.centroids.size() < 2) continue;
      std::array<Point<D>, 1> parent{state.centroids[c]};
      std::vector<std::size_t> zeros(region.size(), 0);
      double parent_bic = bic<D>(region, zeros, parent);
      double child_bic = bic<D>(region, local.labels, local.centroids);
      if (child_bic > parent_bic) splits.push_back({c, local.centroids, child_bic - parent_bic});
    }
    if (splits.empty()) break;

    std::stable_sort(splits.begin(), splits.end(),
                     [](const Split& a, const Split& b) { return a.gain > b.gain; });
    splits.resize(std::min(splits.size(), k_max - state.centroids.size()));

    std::vector<bool> replaced(state.centroids.size(), false);
    std::vector<Point<D>> next;
    for (const auto& s : splits) {
      replaced[s.parent] = true;
      next.insert(next.end(), s.children.begin(), s.children.end());
    }
    for (std::size_t c = 0; c < state.centroids.size(); ++c)
      if (!replaced[c]) next.push_back(state.centroids[c]);

    auto before = state.centroids.size();
    state = kmeans<D>(pts, std::move(next));
    if (state.centroids.size() <= before) break;  // the refit collapsed the new centroids
  }

  out.k = state.centroids.size();
  out.labels = std::move(state.labels);
  out.centroids = std::move(state.centroids);
  return out;
}

}  // namespace botwatch
