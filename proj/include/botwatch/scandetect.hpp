#pragma once

// Threshold scan detector. Within any sliding interval (default 60 s) an
// internal host that touches
//   - >= ports_thr distinct ports on one target      -> {TCP,UDP}_PORTSCAN
//   - >= hosts_thr distinct targets on one port       -> {TCP,UDP}_PORTSWEEP
//   - >= hosts_thr distinct targets via ICMP          -> ICMP_SWEEP
// raises one alert per (host, scan type) per window.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "botwatch/model.hpp"

namespace botwatch {

struct ScanThresholds {
  Micros interval = std::chrono::seconds(60);
  std::size_t ports = 15;
  std::size_t hosts = 15;

  static ScanThresholds from(const Config& cfg) {
    return {cfg.scan_interval, cfg.scan_ports_thr, cfg.scan_hosts_thr};
  }
};

class ScanDetector {
 public:
  ScanDetector(ScanThresholds thr, std::vector<Prefix> internal)
      : thr_(thr), internal_(std::move(internal)) {}

  explicit ScanDetector(const Config& cfg)
      : ScanDetector(ScanThresholds::from(cfg), cfg.internal_prefixes) {}

  // Records a probe if `ev` is one.
  // TCP counts only bare SYNs (connection attempts); UDP and ICMP count
  // every packet. External sources are dropped here.
  void add(const PacketEvent& ev) {
    if (!is_internal(ev.src_ip)) return;
    switch (ev.protocol) {
      case Protocol::Tcp:
        if (!ev.flags.syn || ev.flags.ack) return;
        [[fallthrough]];
      case Protocol::Udp: {
        auto family = ev.protocol == Protocol::Tcp ? Family::Tcp : Family::Udp;
        per_target_[{ev.src_ip, family, ev.dst_ip.value()}].push_back({ev.ts, ev.dst_port});
        per_port_[{ev.src_ip, family, ev.dst_port}].push_back({ev.ts, ev.dst_ip.value()});
        break;
      }
      case Protocol::Icmp:
        per_port_[{ev.src_ip, Family::Icmp, 0}].push_back({ev.ts, ev.dst_ip.value()});
        break;
      default:
        break;
    }
  }

  // Alerts for everything added since the last call, then resets.
  std::vector<ScanAlert> detect(WindowIndex window, std::uint64_t first_alert_id = 0) {
    std::map<std::pair<HostId, ScanType>, ScanAlert> found;
    auto offer = [&](ScanAlert a) {
      auto key = std::make_pair(a.host, a.scan_type);
      auto it = found.find(key);
      if (it == found.end() || a.ts < it->second.ts) found[key] = a;
    };

    for (auto* group : {&per_target_, &per_port_}) {
      for (auto& [key, probes] : *group) {
        std::stable_sort(probes.begin(), probes.end(),
                         [](const Probe& x, const Probe& y) { return x.ts < y.ts; });
      }
    }

    for (const auto& [key, probes] : per_target_) {
      const auto& [host, family, target] = key;
      if (auto hit = first_crossing(probes, thr_.ports)) {
        ScanAlert a;
        a.window = window;
        a.host = host;
        a.scan_type = family == Family::Tcp ? ScanType::TcpPortscan : ScanType::UdpPortscan;
        a.scanned_prefix = Prefix{Ipv4(target), 32};
        a.ts = *hit;
        offer(a);
      }
    }
    for (const auto& [key, probes] : per_port_) {
      const auto& [host, family, port] = key;
      if (auto hit = first_crossing(probes, thr_.hosts)) {
        ScanAlert a;
        a.window = window;
        a.host = host;
        a.ts = *hit;
        a.scanned_prefix = Prefix{Ipv4(probes.front().value & 0xffffff00u), 24};
        if (family == Family::Icmp) {
          a.scan_type = ScanType::IcmpSweep;
        } else {
          a.scan_type = family == Family::Tcp ? ScanType::TcpPortsweep : ScanType::UdpPortsweep;
          a.scanned_port = port;
        }
        offer(a);
      }
    }
    per_target_.clear();
    per_port_.clear();

    std::vector<ScanAlert> out;
    out.reserve(found.size());
    for (auto& [key, alert] : found) {
      alert.alert_id = first_alert_id + out.size();
      out.push_back(alert);
    }
    return out;
  }

 private:
  enum class Family : std::uint8_t { Tcp, Udp, Icmp };

  struct Probe {
    Timestamp ts;
    std::uint32_t value;  // port or address, depending on the grouping
  };

  using Key = std::tuple<HostId, Family, std::uint32_t>;

  bool is_internal(Ipv4 ip) const {
    return std::any_of(internal_.begin(), internal_.end(),
                       [&](const Prefix& p) { return p.contains(ip); });
  }

  // Timestamp of the probe at which some interval [t, t + interval) first
  // holds `threshold` distinct values.
  std::optional<Timestamp> first_crossing(const std::vector<Probe>& probes,
                                          std::size_t threshold) const {
    if (probes.size() < threshold) return std::nullopt;
    std::unordered_map<std::uint32_t, std::size_t> counts;
    std::size_t left = 0;
    for (std::size_t right = 0; right < probes.size(); ++right) {
      ++counts[probes[right].value];
      while (probes[right].ts - probes[left].ts >= thr_.interval) {
        auto c = counts.find(probes[left].value);
        if (--c->second == 0) counts.erase(c);
        ++left;
      }
      if (counts.size() >= threshold) return probes[right].ts;
    }
    return std::nullopt;
  }

  ScanThresholds thr_;
  std::vector<Prefix> internal_;
  std::map<Key, std::vector<Probe>> per_target_;
  std::map<Key, std::vector<Probe>> per_port_;
};

// One-shot form over a window's event list.
inline std::vector<ScanAlert> detect_scans(std::span<const PacketEvent> events, WindowIndex window,
                                           const Config& cfg) {
  ScanDetector det(cfg);
  for (const auto& ev : events) det.add(ev);
  return det.detect(window);
}

}  // namespace botwatch
