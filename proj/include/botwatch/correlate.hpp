#pragma once

// Cross-window cluster correlation and per-host scoring.
//
// Two clusters from windows i <= j are correlated with degree
//   1 - exp(-(|A n B| / |A u B|) * |A n B| / ((j - i) + 1))
// over their host sets. At the close of window n each host h gets
//   max_{i = 0..max_num_tw} TWCorrelation(h, TW_n, TW_{n-i})
// when positive, otherwise -(n - last correlated window of h). The result is
// a delta applied to a cumulative score clamped at zero; hosts above
// bot_thr are reported.

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "botwatch/model.hpp"

namespace botwatch {

inline std::size_t intersection_size(const std::vector<HostId>& a, const std::vector<HostId>& b) {
  std::size_t n = 0;
  auto i = a.begin(), j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

inline double cluster_correlation(const Cluster& ci, const Cluster& cj, WindowIndex i,
                                  WindowIndex j) {
  auto inter = static_cast<double>(intersection_size(ci.hosts, cj.hosts));
  if (inter == 0.0) return 0.0;
  auto uni = static_cast<double>(ci.hosts.size() + cj.hosts.size()) - inter;
  auto distance = static_cast<double>(j >= i ? j - i : i - j);
  return 1.0 - std::exp(-(inter / uni) * inter / (distance + 1.0));
}

// Points from correlated cluster pairs between the current window and an
// earlier (or the same) window: 1 per netflow cluster, 2 per scan cluster,
// capped at max_tw_score. Only clusters containing `h` take part, and a
// cluster is never paired with itself.
inline double tw_correlation(HostId h, std::span<const Cluster> current,
                             std::span<const Cluster> other, WindowIndex current_tw,
                             WindowIndex other_tw, const Config& cfg) {
  std::set<const Cluster*> correlated;
  for (const auto& ci : current) {
    if (!ci.contains(h)) continue;
    for (const auto& cj : other) {
      if (&ci == &cj || !cj.contains(h)) continue;
      if (current_tw == other_tw && ci.cluster_id == cj.cluster_id) continue;
      if (cluster_correlation(cj, ci, other_tw, current_tw) >= cfg.corr_thr) {
        correlated.insert(&ci);
        correlated.insert(&cj);
      }
    }
  }
  double points = 0.0;
  for (const auto* c : correlated) points += c->kind == ClusterKind::Scan ? 2.0 : 1.0;
  return std::min(points, cfg.max_tw_score);
}

// Clusters of the most recent max_num_tw + 1 windows.
class WindowStore {
 public:
  explicit WindowStore(int max_num_tw) : max_num_tw_(max_num_tw) {}

  // Windows must be pushed in increasing order.
  void push(WindowIndex window, std::vector<Cluster> clusters) {
    windows_.emplace_back(window, std::move(clusters));
    while (!windows_.empty() && windows_.front().first < window - max_num_tw_)
      windows_.pop_front();
  }

  const std::vector<Cluster>* get(WindowIndex window) const {
    for (const auto& [w, clusters] : windows_)
      if (w == window) return &clusters;
    return nullptr;
  }

  std::optional<WindowIndex> oldest() const {
    if (windows_.empty()) return std::nullopt;
    return windows_.front().first;
  }
  std::size_t size() const noexcept { return windows_.size(); }

 private:
  int max_num_tw_;
  std::deque<std::pair<WindowIndex, std::vector<Cluster>>> windows_;
};

inline double score(HostId h, WindowIndex n, const WindowStore& store,
                    const HostScoreState& state, const Config& cfg) {
  const auto* current = store.get(n);
  double best = 0.0;
  if (current) {
    for (int i = 0; i <= cfg.max_num_tw && n - i >= 0; ++i) {
      const auto* other = store.get(n - i);
      if (!other) continue;
      best = std::max(best, tw_correlation(h, *current, *other, n, n - i, cfg));
    }
  }
  if (best > 0.0) return best;
  if (!state.last_correlated_tw) return 0.0;
  return -static_cast<double>(n - *state.last_correlated_tw);
}

struct ScoreUpdate {
  WindowIndex window = 0;
  HostId host;
  double cumulative_score = 0.0;
  double delta = 0.0;
  bool flagged = false;
};

using ScoreTable = std::map<HostId, HostScoreState>;

class Correlator {
 public:
  explicit Correlator(Config cfg) : cfg_(std::move(cfg)), store_(cfg_.max_num_tw) {}

  // Closes window n: stores its clusters, rescoring every host that appears
  // in them or still holds a positive score. Returns one row per such host.
  std::vector<ScoreUpdate> update(WindowIndex n, std::vector<Cluster> clusters) {
    std::set<HostId> hosts;
    for (const auto& c : clusters) hosts.insert(c.hosts.begin(), c.hosts.end());
    for (const auto& [h, st] : table_)
      if (st.score > 0.0) hosts.insert(h);
    store_.push(n, std::move(clusters));

    std::vector<ScoreUpdate> rows;
    rows.reserve(hosts.size());
    for (auto h : hosts) {
      auto& st = table_.try_emplace(h, HostScoreState{h, 0.0, std::nullopt, std::nullopt}).first->second;
      double delta = score(h, n, store_, st, cfg_);
      if (delta > 0.0) st.last_correlated_tw = n;
      st.score = std::max(0.0, st.score + delta);
      bool flagged = st.score > cfg_.bot_thr;
      if (flagged && !st.first_flagged_tw) st.first_flagged_tw = n;
      rows.push_back({n, h, st.score, delta, flagged});
    }
    return rows;
  }

  // Hosts currently above bot_thr, with their scores.
  std::vector<std::pair<HostId, double>> flagged() const {
    std::vector<std::pair<HostId, double>> out;
    for (const auto& [h, st] : table_)
      if (st.score > cfg_.bot_thr) out.emplace_back(h, st.score);
    return out;
  }

  const ScoreTable& table() const noexcept { return table_; }
  const WindowStore& store() const noexcept { return store_; }
  const Config& config() const noexcept { return cfg_; }

 private:
  Config cfg_;
  WindowStore store_;
  ScoreTable table_;
};

// Single-step form: updates the correlator and returns the hosts above the
// bot threshold after window n.
inline std::vector<std::pair<HostId, double>> update_and_report(Correlator& correlator,
                                                                WindowIndex n,
                                                                std::vector<Cluster> clusters) {
  correlator.update(n, std::move(clusters));
  return correlator.flagged();
}

}  // namespace botwatch
