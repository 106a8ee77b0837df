#pragma once

// Pre-clustering filters for netflows and scan alerts.

#include <span>
#include <string>
#include <vector>

#include "botwatch/ingest.hpp"
#include "botwatch/model.hpp"

namespace botwatch {

enum class FlowRule { InternalOrInbound, NoPayload, Bulky, Whitelisted };

// Which rule (if any) drops `f`. Rules apply in order; the whitelist rule
// is only consulted when `cfg.whitelist_rule` is set.
inline std::optional<FlowRule> flow_drop_reason(const Netflow& f, const DomainIpMap& map,
                                                const Config& cfg) {
  if (!cfg.is_internal(f.src) || cfg.is_internal(f.dst_ip)) return FlowRule::InternalOrInbound;
  if (f.sent_bytes == 0 && f.recv_bytes == 0) return FlowRule::NoPayload;
  if (f.sent_bytes + f.recv_bytes > cfg.bulky_thr) return FlowRule::Bulky;
  if (cfg.whitelist_rule && is_whitelisted(map, f.dst_ip, cfg.whitelist_domains))
    return FlowRule::Whitelisted;
  return std::nullopt;
}

inline std::vector<Netflow> filter_netflows(std::span<const Netflow> flows, const DomainIpMap& map,
                                            const Config& cfg) {
  std::vector<Netflow> out;
  for (const auto& f : flows) {
    if (!flow_drop_reason(f, map, cfg)) out.push_back(f);
  }
  return out;
}

inline std::vector<ScanAlert> filter_alerts(std::span<const ScanAlert> alerts, const Config& cfg) {
  std::vector<ScanAlert> out;
  for (const auto& a : alerts) {
    if (cfg.is_internal(a.host)) out.push_back(a);
  }
  return out;
}

}  // namespace botwatch
