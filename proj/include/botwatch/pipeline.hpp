#pragma once

// Window-driven detection pipeline:
//   events -> {domain map, flow table, scan detector}
//   window close -> filters -> clustering -> correlation -> report rows

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "botwatch/cluster.hpp"
#include "botwatch/correlate.hpp"
#include "botwatch/filter.hpp"
#include "botwatch/flowgen.hpp"
#include "botwatch/ingest.hpp"
#include "botwatch/model.hpp"
#include "botwatch/report.hpp"
#include "botwatch/scandetect.hpp"

namespace botwatch {

struct WindowResult {
  WindowIndex window = 0;
  std::size_t flows_generated = 0;
  std::size_t alerts_generated = 0;
  std::vector<Netflow> flows;     // after filtering
  std::vector<ScanAlert> alerts;  // after filtering
  std::vector<Cluster> clusters;
  std::vector<ScoreUpdate> updates;
};

// Loads whitelist_file into whitelist_domains when the whitelist rule is on.
inline Config resolve_whitelist(Config cfg) {
  if (cfg.whitelist_rule && !cfg.whitelist_file.empty()) {
    for (auto& d : load_whitelist(cfg.whitelist_file)) cfg.whitelist_domains.push_back(d);
  }
  return cfg;
}

class Pipeline {
 public:
  using WindowCallback = std::function<void(const WindowResult&)>;

  explicit Pipeline(Config cfg, WindowCallback on_window = {})
      : cfg_((cfg.validate(), std::move(cfg))),
        flows_(cfg_),
        scans_(cfg_),
        correlator_(cfg_),
        on_window_(std::move(on_window)) {}

  // Events must be in non-decreasing timestamp order.
  void push(const PacketEvent& ev) {
    if (!epoch_) {
      epoch_ = ev.ts;
    } else if (ev.ts < last_ts_) {
      throw InputError("events must be pushed in timestamp order");
    }
    last_ts_ = ev.ts;
    auto w = window_index(ev.ts, *epoch_, cfg_.tw_size);
    while (current_ < w) close_window(current_++);

    if (cfg_.is_internal(ev.src_ip)) observed_.insert(ev.src_ip);

    auto routes = dispatch(ev);
    if (routes.has(Route::DomainIpMapping)) dns_.record_dns(ev);
    if (routes.has(Route::NetflowGenerating)) flows_.observe(ev);
    if (routes.has(Route::AlertGenerating)) scans_.add(ev);
  }

  // Closes the last open window. Further pushes are an error.
  void finish() {
    if (finished_) return;
    finished_ = true;
    if (epoch_) close_window(current_);
  }

  Summary summary() const {
    Summary s;
    s.windows = windows_closed_;
    s.epoch = epoch_;
    s.observed_hosts.assign(observed_.begin(), observed_.end());
    for (const auto& [h, st] : correlator_.table()) {
      HostVerdict v;
      v.host = h;
      v.final_score = st.score;
      auto peak = peak_.find(h);
      v.peak_score = peak == peak_.end() ? 0.0 : peak->second;
      v.flagged = st.first_flagged_tw.has_value();
      v.first_flagged_window = st.first_flagged_tw;
      s.hosts.push_back(v);
    }
    return s;
  }

  const Correlator& correlator() const noexcept { return correlator_; }
  const DomainIpMap& domain_map() const noexcept { return dns_; }
  const Config& config() const noexcept { return cfg_; }

 private:
  void close_window(WindowIndex w) {
    if (finished_ && w != current_) return;
    WindowResult r;
    r.window = w;
    auto flows = flows_.close_window(w, window_start(w + 1, *epoch_, cfg_.tw_size));
    auto alerts = scans_.detect(w, next_alert_id_);
    next_alert_id_ += alerts.size();
    r.flows_generated = flows.size();
    r.alerts_generated = alerts.size();
    r.flows = filter_netflows(flows, dns_, cfg_);
    r.alerts = filter_alerts(alerts, cfg_);

    r.clusters = cluster_netflows(r.flows, cfg_);
    auto scan_clusters = cluster_alerts(r.alerts);
    r.clusters.insert(r.clusters.end(), scan_clusters.begin(), scan_clusters.end());

    r.updates = correlator_.update(w, r.clusters);
    for (const auto& u : r.updates) {
      auto& p = peak_[u.host];
      p = std::max(p, u.cumulative_score);
    }
    ++windows_closed_;
    if (on_window_) on_window_(r);
  }

  Config cfg_;
  FlowTable flows_;
  ScanDetector scans_;
  DomainIpMap dns_;
  Correlator correlator_;
  WindowCallback on_window_;

  std::optional<Timestamp> epoch_;
  Timestamp last_ts_{0};
  WindowIndex current_ = 0;
  std::size_t windows_closed_ = 0;
  std::uint64_t next_alert_id_ = 0;
  bool finished_ = false;
  std::set<HostId> observed_;
  std::map<HostId, double> peak_;
};

struct RunOptions {
  bool dump = false;  // also write netflows/alerts/clusters JSONL
};

// Runs a trace file end to end and writes windows.jsonl and summary.json
// (plus debug dumps) into `out_dir`.
inline Summary run_pipeline(const std::string& trace_path, const Config& cfg,
                            const std::filesystem::path& out_dir, RunOptions opts = {}) {
  std::ifstream trace(trace_path);
  if (!trace) throw InputError("cannot open trace file: " + trace_path);
  std::filesystem::create_directories(out_dir);

  std::ofstream windows(out_dir / "windows.jsonl");
  std::ofstream netflows, alerts, clusters;
  if (opts.dump) {
    netflows.open(out_dir / "netflows.jsonl");
    alerts.open(out_dir / "alerts.jsonl");
    clusters.open(out_dir / "clusters.jsonl");
  }
  Pipeline pipeline(resolve_whitelist(cfg), [&](const WindowResult& r) {
    for (const auto& u : r.updates) windows << to_jsonl(u) << '\n';
    if (!opts.dump) return;
    for (const auto& f : r.flows) netflows << to_jsonl(f) << '\n';
    for (const auto& a : r.alerts) alerts << to_jsonl(a) << '\n';
    for (const auto& c : r.clusters) clusters << to_jsonl(c) << '\n';
  });

  TraceReader reader(trace);
  while (auto ev = reader.next()) pipeline.push(*ev);
  pipeline.finish();

  auto summary = pipeline.summary();
  std::ofstream(out_dir / "summary.json") << to_json(summary).dump(2) << '\n';
  return summary;
}

}  // namespace botwatch
