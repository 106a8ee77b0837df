#pragma once

// Report and label file formats, and verdict evaluation against labels.
//
//   windows.jsonl  one row per rescored host per window:
//                  {window, host, cumulative_score, delta, flagged}
//   summary.json   {windows, epoch_us, observed_hosts, hosts: [{host,
//                  final_score, peak_score, flagged, first_flagged_window}],
//                  bots}
//   labels.json    {bots: [ip...], normal: [ip...], cohorts: [...]}

#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "botwatch/correlate.hpp"
#include "botwatch/ingest.hpp"
#include "botwatch/model.hpp"

namespace botwatch {

struct HostVerdict {
  HostId host;
  double final_score = 0.0;
  double peak_score = 0.0;
  bool flagged = false;  // exceeded bot_thr in some window
  std::optional<WindowIndex> first_flagged_window;

  bool operator==(const HostVerdict&) const = default;
};

struct Summary {
  std::size_t windows = 0;
  std::optional<Timestamp> epoch;
  std::vector<HostId> observed_hosts;  // internal hosts that sent traffic, sorted
  std::vector<HostVerdict> hosts;      // every host that entered the score table

  std::vector<HostId> bots() const {
    std::vector<HostId> out;
    for (const auto& v : hosts)
      if (v.flagged) out.push_back(v.host);
    return out;
  }

  bool operator==(const Summary&) const = default;
};

namespace detail {

inline nlohmann::json host_array(const std::vector<HostId>& hosts) {
  auto arr = nlohmann::json::array();
  for (auto h : hosts) arr.push_back(h.to_string());
  return arr;
}

inline std::vector<HostId> parse_host_array(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string(what) + " must be an array of IPv4 strings");
  std::vector<HostId> out;
  for (const auto& item : j) {
    auto ip = item.is_string() ? Ipv4::parse(item.get_ref<const std::string&>()) : std::nullopt;
    if (!ip) throw InputError(std::string("invalid host in ") + what);
    out.push_back(*ip);
  }
  return out;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace detail

inline std::string to_jsonl(const ScoreUpdate& u) {
  nlohmann::json j{{"window", u.window},
                   {"host", u.host.to_string()},
                   {"cumulative_score", u.cumulative_score},
                   {"delta", u.delta},
                   {"flagged", u.flagged}};
  return j.dump();
}

inline nlohmann::json to_json(const Summary& s) {
  auto hosts = nlohmann::json::array();
  for (const auto& v : s.hosts) {
    hosts.push_back({{"host", v.host.to_string()},
                     {"final_score", v.final_score},
                     {"peak_score", v.peak_score},
                     {"flagged", v.flagged},
                     {"first_flagged_window", v.first_flagged_window
                                                  ? nlohmann::json(*v.first_flagged_window)
                                                  : nlohmann::json(nullptr)}});
  }
  return {{"windows", s.windows},
          {"epoch_us", s.epoch ? nlohmann::json(s.epoch->count()) : nlohmann::json(nullptr)},
          {"observed_hosts", detail::host_array(s.observed_hosts)},
          {"hosts", std::move(hosts)},
          {"bots", detail::host_array(s.bots())}};
}

inline Summary summary_from_json(const nlohmann::json& j) {
  try {
    Summary s;
    s.windows = j.at("windows").get<std::size_t>();
    if (!j.at("epoch_us").is_null()) s.epoch = Micros(j.at("epoch_us").get<std::int64_t>());
    s.observed_hosts = detail::parse_host_array(j.at("observed_hosts"), "observed_hosts");
    for (const auto& h : j.at("hosts")) {
      HostVerdict v;
      auto ip = Ipv4::parse(h.at("host").get<std::string>());
      if (!ip) throw InputError("invalid host in summary");
      v.host = *ip;
      v.final_score = h.at("final_score").get<double>();
      v.peak_score = h.at("peak_score").get<double>();
      v.flagged = h.at("flagged").get<bool>();
      if (!h.at("first_flagged_window").is_null())
        v.first_flagged_window = h.at("first_flagged_window").get<WindowIndex>();
      s.hosts.push_back(v);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed summary: ") + e.what());
  }
}

inline Summary load_summary(const std::string& path) {
  return summary_from_json(detail::read_json_file(path));
}

// ---------------------------------------------------------------------------
// Debug dumps

inline std::string to_jsonl(const Netflow& f) {
  nlohmann::json j{{"flow_id", f.flow_id},
                   {"window", f.window},
                   {"start_ts", f.start_ts.count()},
                   {"end_ts", f.end_ts.count()},
                   {"src", f.src.to_string()},
                   {"src_port", f.src_port},
                   {"dst_ip", f.dst_ip.to_string()},
                   {"dst_port", f.dst_port},
                   {"sent_pkts", f.sent_pkts},
                   {"recv_pkts", f.recv_pkts},
                   {"sent_bytes", f.sent_bytes},
                   {"recv_bytes", f.recv_bytes},
                   {"sent_payload", base64_encode(f.sent_payload)},
                   {"recv_payload", base64_encode(f.recv_payload)},
                   {"partial", f.partial}};
  return j.dump();
}

inline std::string to_jsonl(const ScanAlert& a) {
  nlohmann::json j{{"alert_id", a.alert_id},
                   {"window", a.window},
                   {"host", a.host.to_string()},
                   {"scan_type", to_string(a.scan_type)},
                   {"scanned_port", a.scanned_port ? nlohmann::json(*a.scanned_port) : nlohmann::json(nullptr)},
                   {"scanned_prefix",
                    a.scanned_prefix ? nlohmann::json(a.scanned_prefix->to_string()) : nlohmann::json(nullptr)},
                   {"ts", a.ts.count()}};
  return j.dump();
}

inline std::string to_jsonl(const Cluster& c) {
  nlohmann::json j{{"cluster_id", c.cluster_id},
                   {"window", c.window},
                   {"kind", to_string(c.kind)},
                   {"hosts", detail::host_array(c.hosts)},
                   {"members", c.members}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Labels and evaluation

struct Labels {
  std::vector<HostId> bots;
  std::vector<HostId> normal;
};

inline Labels labels_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("bots")) throw InputError("labels must contain \"bots\"");
  Labels l;
  l.bots = detail::parse_host_array(j.at("bots"), "bots");
  if (j.contains("normal")) l.normal = detail::parse_host_array(j.at("normal"), "normal");
  return l;
}

inline Labels load_labels(const std::string& path) {
  return labels_from_json(detail::read_json_file(path));
}

struct Evaluation {
  std::size_t n_bots = 0;
  std::size_t n_normal = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t true_negatives = 0;
  std::optional<double> detection_rate;  // undefined without labelled bots
  std::map<HostId, std::optional<WindowIndex>> first_detection_window;  // per labelled bot
  std::vector<HostId> false_positive_hosts;
};

// Confusion counts over host verdicts. The normal population is every
// labelled or observed host that is not a labelled bot, so FP + TN always
// equals the number of normal hosts.
inline Evaluation evaluate(const Summary& report, const Labels& labels) {
  std::set<HostId> observed(report.observed_hosts.begin(), report.observed_hosts.end());
  for (const auto& v : report.hosts) {
    if (!observed.count(v.host))
      throw InputError("report host " + v.host.to_string() + " does not appear in the trace");
  }
  std::set<HostId> bots(labels.bots.begin(), labels.bots.end());
  std::set<HostId> normal(labels.normal.begin(), labels.normal.end());
  normal.insert(observed.begin(), observed.end());
  for (auto b : bots) normal.erase(b);

  std::map<HostId, const HostVerdict*> verdicts;
  for (const auto& v : report.hosts) verdicts[v.host] = &v;

  Evaluation e;
  e.n_bots = bots.size();
  e.n_normal = normal.size();
  for (auto b : bots) {
    auto it = verdicts.find(b);
    bool hit = it != verdicts.end() && it->second->flagged;
    e.first_detection_window[b] = hit ? it->second->first_flagged_window : std::nullopt;
    hit ? ++e.true_positives : ++e.false_negatives;
  }
  for (const auto& v : report.hosts) {
    if (v.flagged && normal.count(v.host)) {
      ++e.false_positives;
      e.false_positive_hosts.push_back(v.host);
    }
  }
  e.true_negatives = e.n_normal - e.false_positives;
  if (e.n_bots > 0)
    e.detection_rate = static_cast<double>(e.true_positives) / static_cast<double>(e.n_bots);
  return e;
}

inline nlohmann::json to_json(const Evaluation& e) {
  nlohmann::json first = nlohmann::json::object();
  for (const auto& [h, w] : e.first_detection_window)
    first[h.to_string()] = w ? nlohmann::json(*w) : nlohmann::json(nullptr);
  return {{"bots", e.n_bots},
          {"normal", e.n_normal},
          {"true_positives", e.true_positives},
          {"false_positives", e.false_positives},
          {"false_negatives", e.false_negatives},
          {"true_negatives", e.true_negatives},
          {"detection_rate", e.detection_rate ? nlohmann::json(*e.detection_rate) : nlohmann::json(nullptr)},
          {"first_detection_window", std::move(first)},
          {"false_positive_hosts", detail::host_array(e.false_positive_hosts)}};
}

}  // namespace botwatch
