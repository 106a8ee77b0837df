#pragma once

// Average-linkage agglomerative clustering over a stored distance matrix
// (nearest-neighbour chain, O(n^2)) and flat cuts of the resulting tree.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace botwatch {

// Symmetric, zero-diagonal matrix kept in condensed (upper-triangle) form.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

  template <typename F>
  static DistanceMatrix build(std::size_t n, F&& dist) {
    DistanceMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, dist(i, j));
    return m;
  }

  std::size_t size() const noexcept { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    return d_[index(i, j)];
  }

  void set(std::size_t i, std::size_t j, double v) {
    if (i == j) throw std::invalid_argument("diagonal of a distance matrix is fixed at zero");
    d_[index(i, j)] = v;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i + 1) / 2 + (j - i - 1);
  }

  std::size_t n_;
  std::vector<double> d_;
};

struct Merge {
  std::size_t a;  // any member index of each joined cluster
  std::size_t b;
  double height;
};

// Returns the n - 1 merges of the average-linkage dendrogram (not sorted by
// height). Average linkage is reducible, so the nearest-neighbour chain
// yields the same tree as the greedy closest-pair algorithm.
inline std::vector<Merge> average_linkage(DistanceMatrix d) {
  const std::size_t n = d.size();
  std::vector<Merge> merges;
  if (n < 2) return merges;
  merges.reserve(n - 1);
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> chain;
  std::size_t remaining = n;

  while (remaining > 1) {
    if (chain.empty()) {
      chain.push_back(static_cast<std::size_t>(
          std::find(active.begin(), active.end(), true) - active.begin()));
    }
    while (true) {
      std::size_t a = chain.back();
      std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
      std::size_t b = prev;
      double best = prev < n ? d(a, prev) : std::numeric_limits<double>::infinity();
      for (std::size_t x = 0; x < n; ++x) {
        if (!active[x] || x == a) continue;
        double v = d(a, x);
        if (v < best) {
          best = v;
          b = x;
        }
      }
      if (b == prev) {
        chain.pop_back();
        chain.pop_back();
        std::size_t keep = std::min(a, b), drop = std::max(a, b);
        double na = static_cast<double>(size[a]), nb = static_cast<double>(size[b]);
        for (std::size_t x = 0; x < n; ++x) {
          if (!active[x] || x == a || x == b) continue;
          d.set(keep, x, (na * d(a, x) + nb * d(b, x)) / (na + nb));
        }
        size[keep] += size[drop];
        active[drop] = false;
        --remaining;
        merges.push_back({a, b, best});
        break;
      }
      chain.push_back(b);
    }
  }
  return merges;
}

// Flat clusters obtained by cutting the dendrogram at `height`: merges at
// or below the height are applied. Labels are numbered by first occurrence.
inline std::vector<std::size_t> cut_tree(std::size_t n, const std::vector<Merge>& merges,
                                         double height) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& m : merges) {
    if (m.height <= height) parent[find(m.a)] = find(m.b);
  }
  std::vector<std::size_t> labels(n);
  std::vector<std::size_t> root_label(n, n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = find(i);
    if (root_label[r] == n) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return labels;
}

inline std::vector<std::size_t> average_linkage_cut(const DistanceMatrix& d, double height) {
  return cut_tree(d.size(), average_linkage(d), height);
}

}  // namespace botwatch
