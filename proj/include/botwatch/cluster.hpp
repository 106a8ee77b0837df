#pragma once

// Two-level netflow clustering and scan-alert clustering for one window.
//
// Level 1 groups flows by their 8-feature behaviour vector (X-means on
// per-window z-scores). Level 2 splits each level-1 group by payload
// similarity: average-linkage clustering over
//   d(Fi, Fj) = ws * NCD(SPi, SPj) + wr * NCD(RPi, RPj)
//   ws = (|SPi| + |SPj|) / (|SPi| + |SPj| + |RPi| + |RPj|),  wr = 1 - ws
// cut at dist_thr. Groups with fewer than two flows are dropped.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "botwatch/hierarchical.hpp"
#include "botwatch/model.hpp"
#include "botwatch/ncd.hpp"
#include "botwatch/xmeans.hpp"

namespace botwatch {

inline FlowVector flow_vector(const Netflow& f) {
  double secs = std::max(static_cast<double>((f.end_ts - f.start_ts).count()) / 1e6, 1.0);
  auto per = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  double sp = static_cast<double>(f.sent_pkts), sb = static_cast<double>(f.sent_bytes);
  double rp = static_cast<double>(f.recv_pkts), rb = static_cast<double>(f.recv_bytes);
  return {sp, sb, per(sb, sp), sb / secs, rp, rb, per(rb, rp), rb / secs};
}

// Per-feature z-score (population deviation); constant features map to 0.
inline std::vector<FlowVector> normalize(std::span<const FlowVector> vectors) {
  std::vector<FlowVector> out(vectors.begin(), vectors.end());
  if (vectors.empty()) return out;
  const double n = static_cast<double>(vectors.size());
  for (std::size_t k = 0; k < kFlowFeatures; ++k) {
    double mean = 0.0;
    for (const auto& v : vectors) mean += v[k];
    mean /= n;
    double var = 0.0;
    for (const auto& v : vectors) var += (v[k] - mean) * (v[k] - mean);
    double sd = std::sqrt(var / n);
    for (auto& v : out) v[k] = sd > 0.0 ? (v[k] - mean) / sd : 0.0;
  }
  return out;
}

struct PayloadWeights {
  double sent = 0.0;
  double recv = 0.0;
};

inline PayloadWeights payload_weights(const Netflow& fi, const Netflow& fj) {
  double s = static_cast<double>(fi.sent_payload.size() + fj.sent_payload.size());
  double r = static_cast<double>(fi.recv_payload.size() + fj.recv_payload.size());
  if (s + r == 0.0) return {};
  return {s / (s + r), r / (s + r)};
}

// Compressed sizes of a flow's two payloads, computed once per flow.
struct PayloadSizes {
  std::size_t sent = 0;
  std::size_t recv = 0;

  static PayloadSizes of(const Netflow& f) {
    return {compressed_size(f.sent_payload), compressed_size(f.recv_payload)};
  }
};

inline double payload_distance(const Netflow& fi, const Netflow& fj, const PayloadSizes& ci,
                               const PayloadSizes& cj) {
  auto w = payload_weights(fi, fj);
  double d = 0.0;
  if (w.sent > 0.0) d += w.sent * ncd(fi.sent_payload, fj.sent_payload, ci.sent, cj.sent);
  if (w.recv > 0.0) d += w.recv * ncd(fi.recv_payload, fj.recv_payload, ci.recv, cj.recv);
  return d;
}

inline double payload_distance(const Netflow& fi, const Netflow& fj) {
  return payload_distance(fi, fj, PayloadSizes::of(fi), PayloadSizes::of(fj));
}

namespace detail {

// Fills the payload distance matrix; rows are spread over hardware threads.
inline DistanceMatrix payload_matrix(std::span<const Netflow* const> flows,
                                     std::span<const PayloadSizes> sizes) {
  const std::size_t n = flows.size();
  DistanceMatrix m(n);
  auto rows = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride)
      for (std::size_t j = i + 1; j < n; ++j)
        m.set(i, j, payload_distance(*flows[i], *flows[j], sizes[i], sizes[j]));
  };
  std::size_t workers = std::min<std::size_t>(std::thread::hardware_concurrency(), n / 16);
  if (workers <= 1) {
    rows(0, 1);
    return m;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(rows, t, workers);
  pool.clear();
  return m;
}

}  // namespace detail

// Partition of `flows` (labels) by average linkage over payload distance.
inline std::vector<std::size_t> hier_cluster(std::span<const Netflow> flows, double dist_thr) {
  if (flows.size() < 2) return std::vector<std::size_t>(flows.size(), 0);
  std::vector<const Netflow*> ptrs;
  std::vector<PayloadSizes> sizes;
  for (const auto& f : flows) {
    ptrs.push_back(&f);
    sizes.push_back(PayloadSizes::of(f));
  }
  return average_linkage_cut(detail::payload_matrix(ptrs, sizes), dist_thr);
}

namespace detail {

inline std::uint64_t window_seed(std::uint64_t seed, WindowIndex window) {
  std::uint64_t x = seed ^ (static_cast<std::uint64_t>(window) * 0x9e3779b97f4a7c15ULL);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  return x ^ (x >> 33);
}

inline Cluster make_cluster(std::string id, WindowIndex window, ClusterKind kind,
                            std::vector<HostId> hosts, std::vector<std::uint64_t> members) {
  std::sort(hosts.begin(), hosts.end());
  hosts.erase(std::unique(hosts.begin(), hosts.end()), hosts.end());
  std::sort(members.begin(), members.end());
  return Cluster{std::move(id), window, kind, std::move(hosts), std::move(members)};
}

}  // namespace detail

struct NetflowClustering {
  std::vector<Cluster> clusters;
  std::vector<std::size_t> first_level;  // X-means label per input flow
  std::size_t first_level_k = 0;
};

// Full two-level clustering; also exposes the level-1 partition.
inline NetflowClustering cluster_netflows_detailed(std::span<const Netflow> flows,
                                                   const Config& cfg) {
  NetflowClustering out;
  if (flows.size() < 2) return out;
  const WindowIndex window = flows.front().window;

  std::vector<FlowVector> vectors;
  vectors.reserve(flows.size());
  for (const auto& f : flows) vectors.push_back(flow_vector(f));
  auto points = normalize(vectors);
  auto level1 = xmeans<kFlowFeatures>(points, cfg.xmeans_k_max, detail::window_seed(cfg.seed, window));
  out.first_level = level1.labels;
  out.first_level_k = level1.k;

  std::vector<PayloadSizes> sizes;
  sizes.reserve(flows.size());
  for (const auto& f : flows) sizes.push_back(PayloadSizes::of(f));

  std::size_t next_id = 0;
  for (std::size_t c = 0; c < level1.k; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < flows.size(); ++i)
      if (level1.labels[i] == c) idx.push_back(i);
    if (idx.size() < 2) continue;

    std::vector<const Netflow*> group;
    std::vector<PayloadSizes> group_sizes;
    for (auto i : idx) {
      group.push_back(&flows[i]);
      group_sizes.push_back(sizes[i]);
    }
    auto labels = average_linkage_cut(detail::payload_matrix(group, group_sizes), cfg.dist_thr);

    std::map<std::size_t, std::vector<std::size_t>> parts;
    for (std::size_t k = 0; k < idx.size(); ++k) parts[labels[k]].push_back(idx[k]);
    for (const auto& [label, members] : parts) {
      if (members.size() < 2) continue;
      std::vector<HostId> hosts;
      std::vector<std::uint64_t> ids;
      for (auto i : members) {
        hosts.push_back(flows[i].src);
        ids.push_back(flows[i].flow_id);
      }
      out.clusters.push_back(detail::make_cluster(
          "w" + std::to_string(window) + "-n" + std::to_string(next_id++), window,
          ClusterKind::Netflow, std::move(hosts), std::move(ids)));
    }
  }
  return out;
}

inline std::vector<Cluster> cluster_netflows(std::span<const Netflow> flows, const Config& cfg) {
  return cluster_netflows_detailed(flows, cfg).clusters;
}

// One cluster per scan type present.
inline std::vector<Cluster> cluster_alerts(std::span<const ScanAlert> alerts) {
  std::map<ScanType, std::pair<std::vector<HostId>, std::vector<std::uint64_t>>> by_type;
  for (const auto& a : alerts) {
    auto& [hosts, ids] = by_type[a.scan_type];
    hosts.push_back(a.host);
    ids.push_back(a.alert_id);
  }
  std::vector<Cluster> out;
  for (auto& [type, group] : by_type) {
    WindowIndex window = alerts.front().window;
    out.push_back(detail::make_cluster(
        "w" + std::to_string(window) + "-s" + std::to_string(out.size()), window,
        ClusterKind::Scan, std::move(group.first), std::move(group.second)));
  }
  return out;
}

}  // namespace botwatch
