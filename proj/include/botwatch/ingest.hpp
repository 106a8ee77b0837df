#pragma once

// Trace ingestion: JSONL event parsing, protocol dispatch and the
// passive DNS (domain <-> address) map used by whitelist filtering.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <fstream>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "botwatch/model.hpp"

namespace botwatch {

// ---------------------------------------------------------------------------
// Base64 (payload encoding in the trace format)

inline std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  if (data.empty()) return out;
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::optional<Bytes> base64_decode(std::string_view text) {
  if (text.empty()) return Bytes{};
  if (text.size() % 4 != 0) return std::nullopt;
  Bytes out(text.size() / 4 * 3);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0) return std::nullopt;
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

// ---------------------------------------------------------------------------
// JSONL event format

namespace detail {

inline std::uint16_t json_port(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) return 0;
  if (!it->is_number_integer()) throw ParseError(line, std::string(key) + " must be an integer");
  auto v = it->get<std::int64_t>();
  if (v < 0 || v > 65535)
    throw ParseError(line, std::string(key) + " out of range: " + std::to_string(v));
  return static_cast<std::uint16_t>(v);
}

inline Ipv4 json_ip(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) throw ParseError(line, std::string("missing ") + key);
  auto ip = Ipv4::parse(it->get_ref<const std::string&>());
  if (!ip) throw ParseError(line, std::string("invalid IPv4 address in ") + key);
  return *ip;
}

// Missing or malformed DNS fields leave the record empty; the domain map
// counts such events instead of rejecting the trace.
inline std::optional<DnsRecord> json_dns(const nlohmann::json& obj) {
  auto q = obj.find("qname");
  if (q == obj.end() || !q->is_string() || q->get_ref<const std::string&>().empty())
    return std::nullopt;
  DnsRecord rec;
  rec.qname = q->get<std::string>();
  if (auto r = obj.find("is_response"); r != obj.end()) {
    if (!r->is_boolean()) return std::nullopt;
    rec.is_response = r->get<bool>();
  }
  if (auto a = obj.find("answers"); a != obj.end()) {
    if (!a->is_array()) return std::nullopt;
    for (const auto& item : *a) {
      if (!item.is_string()) return std::nullopt;
      auto ip = Ipv4::parse(item.get_ref<const std::string&>());
      if (!ip) return std::nullopt;
      rec.answers.push_back(*ip);
    }
  }
  return rec;
}

}  // namespace detail

inline PacketEvent parse_event_line(std::string_view line, std::size_t line_no) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(line_no, "event must be a JSON object");

  PacketEvent ev;
  auto ts = obj.find("ts_us");
  if (ts == obj.end() || !ts->is_number_integer()) throw ParseError(line_no, "missing ts_us");
  if (ts->get<std::int64_t>() < 0) throw ParseError(line_no, "ts_us must be non-negative");
  ev.ts = Micros(ts->get<std::int64_t>());

  auto proto = obj.find("proto");
  if (proto == obj.end() || !proto->is_string()) throw ParseError(line_no, "missing proto");
  auto p = parse_protocol(proto->get_ref<const std::string&>());
  if (!p) throw ParseError(line_no, "unknown proto '" + proto->get<std::string>() + "'");
  ev.protocol = *p;

  ev.src_ip = detail::json_ip(obj, "src_ip", line_no);
  ev.dst_ip = detail::json_ip(obj, "dst_ip", line_no);
  ev.src_port = detail::json_port(obj, "src_port", line_no);
  ev.dst_port = detail::json_port(obj, "dst_port", line_no);

  if (auto f = obj.find("flags"); f != obj.end()) {
    if (!f->is_string()) throw ParseError(line_no, "flags must be a string");
    auto flags = TcpFlags::parse(f->get_ref<const std::string&>());
    if (!flags) throw ParseError(line_no, "flags must be a subset of \"SFRA\"");
    ev.flags = *flags;
  }
  if (auto b = obj.find("payload_b64"); b != obj.end()) {
    if (!b->is_string()) throw ParseError(line_no, "payload_b64 must be a string");
    auto bytes = base64_decode(b->get_ref<const std::string&>());
    if (!bytes) throw ParseError(line_no, "payload_b64 is not valid base64");
    ev.payload = std::move(*bytes);
  }
  if (ev.protocol == Protocol::Dns) ev.dns = detail::json_dns(obj);
  return ev;
}

inline std::string to_jsonl(const PacketEvent& ev) {
  nlohmann::json obj{{"ts_us", ev.ts.count()},
                     {"proto", to_string(ev.protocol)},
                     {"src_ip", ev.src_ip.to_string()},
                     {"dst_ip", ev.dst_ip.to_string()},
                     {"src_port", ev.src_port},
                     {"dst_port", ev.dst_port},
                     {"flags", ev.flags.to_string()},
                     {"payload_b64", base64_encode(ev.payload)}};
  if (ev.dns) {
    obj["qname"] = ev.dns->qname;
    obj["is_response"] = ev.dns->is_response;
    auto answers = nlohmann::json::array();
    for (auto ip : ev.dns->answers) answers.push_back(ip.to_string());
    obj["answers"] = std::move(answers);
  }
  return obj.dump();
}

// Streams events from a JSONL trace in timestamp order. Events may arrive up
// to `kReorderTolerance` late; they are held back and released sorted. A
// regression larger than the tolerance is an InputError.
class TraceReader {
 public:
  static constexpr Micros kReorderTolerance = kSecond;

  explicit TraceReader(std::istream& in) : in_(in) {}

  std::optional<PacketEvent> next() {
    while (!eof_ &&
           (pending_.empty() || pending_.front().event.ts > max_seen_ - kReorderTolerance)) {
      read_one();
    }
    if (pending_.empty()) return std::nullopt;
    std::pop_heap(pending_.begin(), pending_.end(), std::greater<>{});
    PacketEvent ev = std::move(pending_.back().event);
    pending_.pop_back();
    return ev;
  }

  std::size_t lines_read() const noexcept { return line_no_; }

 private:
  struct Pending {
    PacketEvent event;
    std::uint64_t seq;
    bool operator>(const Pending& o) const {
      return event.ts != o.event.ts ? event.ts > o.event.ts : seq > o.seq;
    }
  };

  void read_one() {
    std::string line;
    if (!std::getline(in_, line)) {
      eof_ = true;
      return;
    }
    ++line_no_;
    if (detail::trim(line).empty()) return;
    auto ev = parse_event_line(line, line_no_);
    if (seq_ > 0 && ev.ts < max_seen_ - kReorderTolerance) {
      throw InputError("line " + std::to_string(line_no_) +
                       ": timestamp regresses beyond the reordering tolerance");
    }
    max_seen_ = std::max(max_seen_, ev.ts);
    pending_.push_back(Pending{std::move(ev), seq_++});
    std::push_heap(pending_.begin(), pending_.end(), std::greater<>{});
  }

  std::istream& in_;
  std::vector<Pending> pending_;  // min-heap on (ts, seq)
  Timestamp max_seen_{0};
  std::uint64_t seq_ = 0;
  std::size_t line_no_ = 0;
  bool eof_ = false;
};

inline std::vector<PacketEvent> parse_trace(std::istream& in) {
  TraceReader reader(in);
  std::vector<PacketEvent> out;
  while (auto ev = reader.next()) out.push_back(std::move(*ev));
  return out;
}

inline std::vector<PacketEvent> parse_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open trace file: " + path);
  return parse_trace(in);
}

inline void write_trace(std::ostream& out, std::span<const PacketEvent> events) {
  for (const auto& ev : events) out << to_jsonl(ev) << '\n';
}

// ---------------------------------------------------------------------------
// Dispatch

enum class Route : std::uint8_t {
  DomainIpMapping = 1,
  NetflowGenerating = 2,
  AlertGenerating = 4,
};

class RouteSet {
 public:
  constexpr RouteSet() = default;
  constexpr RouteSet(std::initializer_list<Route> routes) {
    for (auto r : routes) bits_ |= static_cast<std::uint8_t>(r);
  }
  constexpr bool has(Route r) const noexcept { return bits_ & static_cast<std::uint8_t>(r); }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr bool operator==(const RouteSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

constexpr RouteSet dispatch(Protocol p) noexcept {
  switch (p) {
    case Protocol::Dns: return {Route::DomainIpMapping};
    case Protocol::Tcp: return {Route::NetflowGenerating, Route::AlertGenerating};
    case Protocol::Udp:
    case Protocol::Icmp: return {Route::AlertGenerating};
    case Protocol::Other: return {};
  }
  return {};
}

inline RouteSet dispatch(const PacketEvent& ev) noexcept { return dispatch(ev.protocol); }

// ---------------------------------------------------------------------------
// Domain <-> IP map

namespace detail {

inline std::string normalize_domain(std::string_view d) {
  d = trim(d);
  while (!d.empty() && d.back() == '.') d.remove_suffix(1);
  return to_lower(d);
}

}  // namespace detail

// Label-aligned suffix match: "google.com" matches "google.com" and
// "www.google.com" but not "evil-google.com".
inline bool domain_matches(std::string_view domain, std::string_view pattern) {
  if (pattern.empty() || domain.size() < pattern.size()) return false;
  if (domain.substr(domain.size() - pattern.size()) != pattern) return false;
  return domain.size() == pattern.size() || domain[domain.size() - pattern.size() - 1] == '.';
}

class DomainIpMap {
 public:
  // Inserts (answer ip, qname) for every A record of a DNS response.
  // Queries are ignored; events without a usable record are counted.
  void record_dns(const PacketEvent& ev) {
    if (ev.protocol != Protocol::Dns) return;
    if (!ev.dns) {
      ++skipped_;
      return;
    }
    if (!ev.dns->is_response) return;
    auto domain = detail::normalize_domain(ev.dns->qname);
    if (domain.empty()) {
      ++skipped_;
      return;
    }
    for (auto ip : ev.dns->answers) entries_[ip][domain] = ev.ts;
  }

  // Domains observed resolving to `ip`, with the last time each was seen.
  const std::map<std::string, Timestamp>* domains_for(Ipv4 ip) const {
    auto it = entries_.find(ip);
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool contains(Ipv4 ip, std::string_view domain) const {
    auto* d = domains_for(ip);
    return d && d->count(std::string(domain)) > 0;
  }

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& [ip, domains] : entries_) n += domains.size();
    return n;
  }
  std::size_t skipped() const noexcept { return skipped_; }

 private:
  std::map<Ipv4, std::map<std::string, Timestamp>> entries_;
  std::size_t skipped_ = 0;
};

inline bool is_whitelisted(const DomainIpMap& map, Ipv4 ip,
                           std::span<const std::string> whitelist_domains) {
  const auto* domains = map.domains_for(ip);
  if (!domains) return false;
  for (const auto& [domain, seen] : *domains) {
    for (const auto& w : whitelist_domains) {
      if (domain_matches(domain, w)) return true;
    }
  }
  return false;
}

// Newline-delimited domain list; blank lines and '#' comments are skipped.
inline std::vector<std::string> load_whitelist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open whitelist file: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto d = detail::trim(line);
    if (d.empty() || d.front() == '#') continue;
    out.push_back(detail::normalize_domain(d));
  }
  return out;
}

}  // namespace botwatch
