#pragma once

// Shared domain types, configuration and window arithmetic.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace botwatch {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed but semantically unacceptable input (ordering, preconditions).
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Scalars

using Micros = std::chrono::microseconds;
using Timestamp = Micros;  // microseconds since the Unix epoch
using WindowIndex = std::int64_t;
using Bytes = std::vector<std::uint8_t>;

inline constexpr Micros kSecond{1'000'000};

namespace detail {

inline std::string_view trim(std::string_view s) {
  auto issp = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && issp(s.front())) s.remove_prefix(1);
  while (!s.empty() && issp(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Addresses

class Ipv4 {
 public:
  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value_((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) |
               std::uint32_t{d}) {}

  static std::optional<Ipv4> parse(std::string_view text) {
    auto parts = detail::split(text, '.');
    if (parts.size() != 4) return std::nullopt;
    std::uint32_t v = 0;
    for (auto p : parts) {
      if (p.empty() || p.size() > 3) return std::nullopt;
      auto octet = detail::parse_number<unsigned>(p);
      if (!octet || *octet > 255) return std::nullopt;
      v = (v << 8) | *octet;
    }
    return Ipv4(v);
  }

  constexpr std::uint32_t value() const noexcept { return value_; }

  std::string to_string() const {
    return std::to_string(value_ >> 24) + '.' + std::to_string((value_ >> 16) & 0xff) + '.' +
           std::to_string((value_ >> 8) & 0xff) + '.' + std::to_string(value_ & 0xff);
  }

  constexpr auto operator<=>(const Ipv4&) const = default;

 private:
  std::uint32_t value_ = 0;
};

// An internal host is identified by its address.
using HostId = Ipv4;

struct Prefix {
  Ipv4 network;
  int length = 32;

  constexpr std::uint32_t mask() const noexcept {
    return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  }
  constexpr bool contains(Ipv4 addr) const noexcept {
    return (addr.value() & mask()) == (network.value() & mask());
  }

  static std::optional<Prefix> parse(std::string_view text) {
    text = detail::trim(text);
    auto slash = text.find('/');
    auto addr = Ipv4::parse(text.substr(0, slash));
    if (!addr) return std::nullopt;
    int len = 32;
    if (slash != std::string_view::npos) {
      auto l = detail::parse_number<int>(text.substr(slash + 1));
      if (!l || *l < 0 || *l > 32) return std::nullopt;
      len = *l;
    }
    Prefix p{*addr, len};
    p.network = Ipv4(addr->value() & p.mask());
    return p;
  }

  std::string to_string() const { return network.to_string() + '/' + std::to_string(length); }

  constexpr bool operator==(const Prefix&) const = default;
};

// ---------------------------------------------------------------------------
// Packet events

enum class Protocol { Tcp, Udp, Icmp, Dns, Other };

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::Tcp: return "tcp";
    case Protocol::Udp: return "udp";
    case Protocol::Icmp: return "icmp";
    case Protocol::Dns: return "dns";
    case Protocol::Other: return "other";
  }
  return "other";
}

inline std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "tcp") return Protocol::Tcp;
  if (s == "udp") return Protocol::Udp;
  if (s == "icmp") return Protocol::Icmp;
  if (s == "dns") return Protocol::Dns;
  if (s == "other") return Protocol::Other;
  return std::nullopt;
}

inline constexpr std::array kAllProtocols{Protocol::Tcp, Protocol::Udp, Protocol::Icmp,
                                          Protocol::Dns, Protocol::Other};

struct TcpFlags {
  bool syn = false;
  bool fin = false;
  bool rst = false;
  bool ack = false;

  // Accepts any subset of "SFRA" in any order, no repeats.
  static std::optional<TcpFlags> parse(std::string_view s) {
    TcpFlags f;
    for (char c : s) {
      bool* slot = nullptr;
      switch (c) {
        case 'S': slot = &f.syn; break;
        case 'F': slot = &f.fin; break;
        case 'R': slot = &f.rst; break;
        case 'A': slot = &f.ack; break;
        default: return std::nullopt;
      }
      if (*slot) return std::nullopt;
      *slot = true;
    }
    return f;
  }

  std::string to_string() const {
    std::string s;
    if (syn) s += 'S';
    if (fin) s += 'F';
    if (rst) s += 'R';
    if (ack) s += 'A';
    return s;
  }

  bool operator==(const TcpFlags&) const = default;
};

// Pre-parsed DNS message carried by proto = dns events.
struct DnsRecord {
  std::string qname;
  std::vector<Ipv4> answers;
  bool is_response = false;

  bool operator==(const DnsRecord&) const = default;
};

struct PacketEvent {
  Timestamp ts{0};
  Ipv4 src_ip;
  Ipv4 dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::Other;
  Bytes payload;
  TcpFlags flags;
  std::optional<DnsRecord> dns;  // absent when a dns event carried no usable record

  bool operator==(const PacketEvent&) const = default;
};

// ---------------------------------------------------------------------------
// Netflows, alerts, clusters

struct Netflow {
  std::uint64_t flow_id = 0;
  WindowIndex window = 0;
  Timestamp start_ts{0};
  Timestamp end_ts{0};
  HostId src;  // initiator
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Ipv4 dst_ip;
  std::uint64_t sent_pkts = 0;
  std::uint64_t recv_pkts = 0;
  std::uint64_t sent_bytes = 0;  // payload bytes only
  std::uint64_t recv_bytes = 0;
  Bytes sent_payload;  // concatenated, capped at payload_cap
  Bytes recv_payload;
  bool partial = false;

  bool operator==(const Netflow&) const = default;
};

inline constexpr std::size_t kFlowFeatures = 8;

// sent_pkts, sent_bytes, bytes/sent pkt, sent bytes/s,
// recv_pkts, recv_bytes, bytes/recv pkt, recv bytes/s.
using FlowVector = std::array<double, kFlowFeatures>;

enum class ScanType { TcpPortscan, TcpPortsweep, UdpPortscan, UdpPortsweep, IcmpSweep };

inline std::string_view to_string(ScanType t) {
  switch (t) {
    case ScanType::TcpPortscan: return "TCP_PORTSCAN";
    case ScanType::TcpPortsweep: return "TCP_PORTSWEEP";
    case ScanType::UdpPortscan: return "UDP_PORTSCAN";
    case ScanType::UdpPortsweep: return "UDP_PORTSWEEP";
    case ScanType::IcmpSweep: return "ICMP_SWEEP";
  }
  return "?";
}

inline constexpr std::array kAllScanTypes{ScanType::TcpPortscan, ScanType::TcpPortsweep,
                                          ScanType::UdpPortscan, ScanType::UdpPortsweep,
                                          ScanType::IcmpSweep};

inline std::optional<ScanType> parse_scan_type(std::string_view s) {
  for (auto t : kAllScanTypes)
    if (to_string(t) == s) return t;
  return std::nullopt;
}

struct ScanAlert {
  std::uint64_t alert_id = 0;
  WindowIndex window = 0;
  HostId host;
  ScanType scan_type = ScanType::TcpPortscan;
  std::optional<std::uint16_t> scanned_port;
  std::optional<Prefix> scanned_prefix;
  Timestamp ts{0};

  bool operator==(const ScanAlert&) const = default;
};

enum class ClusterKind { Netflow, Scan };

inline std::string_view to_string(ClusterKind k) {
  return k == ClusterKind::Netflow ? "netflow" : "scan";
}

struct Cluster {
  std::string cluster_id;
  WindowIndex window = 0;
  ClusterKind kind = ClusterKind::Netflow;
  std::vector<HostId> hosts;           // sorted, unique
  std::vector<std::uint64_t> members;  // flow ids or alert ids, sorted

  bool contains(HostId h) const { return std::binary_search(hosts.begin(), hosts.end(), h); }
};

struct HostScoreState {
  HostId host;
  double score = 0.0;
  std::optional<WindowIndex> last_correlated_tw;
  std::optional<WindowIndex> first_flagged_tw;
};

// ---------------------------------------------------------------------------
// Configuration

struct Config {
  Micros tw_size = std::chrono::minutes(20);
  int max_num_tw = 3;
  double corr_thr = 0.65;
  double bot_thr = 33.0;
  double max_tw_score = 5.0;
  std::uint64_t bulky_thr = 1u << 20;  // 1 MB
  double dist_thr = 0.35;
  std::vector<Prefix> internal_prefixes{*Prefix::parse("10.0.0.0/8"),
                                        *Prefix::parse("172.16.0.0/12"),
                                        *Prefix::parse("192.168.0.0/16")};
  std::vector<std::string> whitelist_domains;
  std::string whitelist_file;  // optional; merged into whitelist_domains at load time
  bool whitelist_rule = true;
  std::size_t payload_cap = 2048;
  Micros idle_timeout = std::chrono::minutes(5);
  Micros scan_interval = std::chrono::seconds(60);
  std::size_t scan_ports_thr = 15;
  std::size_t scan_hosts_thr = 15;
  std::size_t xmeans_k_max = 16;
  std::uint64_t seed = 42;

  bool is_internal(Ipv4 addr) const {
    return std::any_of(internal_prefixes.begin(), internal_prefixes.end(),
                       [&](const Prefix& p) { return p.contains(addr); });
  }

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(what);
    };
    require(tw_size.count() > 0, "tw_size must be positive");
    require(max_num_tw >= 0, "max_num_tw must be non-negative");
    require(corr_thr > 0.0 && corr_thr < 1.0, "corr_thr must lie in (0,1)");
    require(bot_thr > 0.0, "bot_thr must be positive");
    require(max_tw_score > 0.0, "max_tw_score must be positive");
    require(bulky_thr > 0, "bulky_thr must be positive");
    require(dist_thr > 0.0 && dist_thr <= 1.0, "dist_thr must lie in (0,1]");
    require(payload_cap > 0, "payload_cap must be positive");
    require(idle_timeout.count() > 0, "idle_timeout must be positive");
    require(scan_interval.count() > 0, "scan_interval must be positive");
    require(scan_ports_thr > 0, "scan_ports_thr must be positive");
    require(scan_hosts_thr > 0, "scan_hosts_thr must be positive");
    require(xmeans_k_max > 0, "xmeans_k_max must be positive");
  }

  bool operator==(const Config&) const = default;
};

// Durations: integer with unit suffix us|ms|s|m|h (bare integer = seconds).
inline std::optional<Micros> parse_duration(std::string_view s) {
  s = detail::trim(s);
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
  auto n = detail::parse_number<std::int64_t>(s.substr(0, digits));
  if (!n) return std::nullopt;
  auto unit = s.substr(digits);
  if (unit == "us") return Micros(*n);
  if (unit == "ms") return Micros(*n * 1000);
  if (unit.empty() || unit == "s") return Micros(*n * 1'000'000);
  if (unit == "m") return Micros(*n * 60'000'000);
  if (unit == "h") return Micros(*n * 3'600'000'000LL);
  return std::nullopt;
}

inline std::string format_duration(Micros d) {
  auto us = d.count();
  if (us % 1'000'000 == 0) return std::to_string(us / 1'000'000) + "s";
  return std::to_string(us) + "us";
}

// Byte sizes: integer with optional KB|MB|GB suffix (binary multiples).
inline std::optional<std::uint64_t> parse_byte_size(std::string_view s) {
  s = detail::trim(s);
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
  auto n = detail::parse_number<std::uint64_t>(s.substr(0, digits));
  if (!n) return std::nullopt;
  auto unit = s.substr(digits);
  if (unit.empty() || unit == "B") return *n;
  if (unit == "KB") return *n << 10;
  if (unit == "MB") return *n << 20;
  if (unit == "GB") return *n << 30;
  return std::nullopt;
}

namespace detail {

inline bool parse_bool(std::string_view v, bool& out) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return out = true, true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return out = false, true;
  return false;
}

}  // namespace detail

// Applies one key = value setting. Throws ConfigError for unknown keys or bad values.
inline void apply_config_setting(Config& cfg, std::string_view key, std::string_view value) {
  using detail::parse_number;
  key = detail::trim(key);
  value = detail::trim(value);
  auto bad = [&]() -> ConfigError {
    return ConfigError("invalid value for " + std::string(key) + ": '" + std::string(value) + "'");
  };
  auto set_duration = [&](Micros& slot) {
    auto d = parse_duration(value);
    if (!d) throw bad();
    slot = *d;
  };
  auto set_count = [&](std::size_t& slot) {
    auto n = parse_number<std::size_t>(value);
    if (!n) throw bad();
    slot = *n;
  };
  auto set_real = [&](double& slot) {
    auto x = parse_number<double>(value);
    if (!x || !std::isfinite(*x)) throw bad();
    slot = *x;
  };

  if (key == "tw_size") {
    set_duration(cfg.tw_size);
  } else if (key == "max_num_tw") {
    auto n = parse_number<int>(value);
    if (!n) throw bad();
    cfg.max_num_tw = *n;
  } else if (key == "corr_thr") {
    set_real(cfg.corr_thr);
  } else if (key == "bot_thr") {
    set_real(cfg.bot_thr);
  } else if (key == "max_tw_score") {
    set_real(cfg.max_tw_score);
  } else if (key == "bulky_thr") {
    auto n = parse_byte_size(value);
    if (!n) throw bad();
    cfg.bulky_thr = *n;
  } else if (key == "dist_thr") {
    set_real(cfg.dist_thr);
  } else if (key == "internal_prefixes") {
    cfg.internal_prefixes.clear();
    for (auto item : detail::split(value, ',')) {
      if (detail::trim(item).empty()) continue;
      auto p = Prefix::parse(item);
      if (!p) throw bad();
      cfg.internal_prefixes.push_back(*p);
    }
  } else if (key == "whitelist_domains") {
    cfg.whitelist_domains.clear();
    for (auto item : detail::split(value, ',')) {
      auto d = detail::trim(item);
      if (!d.empty()) cfg.whitelist_domains.push_back(detail::to_lower(d));
    }
  } else if (key == "whitelist_file") {
    cfg.whitelist_file = std::string(value);
  } else if (key == "whitelist_rule") {
    if (!detail::parse_bool(value, cfg.whitelist_rule)) throw bad();
  } else if (key == "payload_cap") {
    set_count(cfg.payload_cap);
  } else if (key == "idle_timeout") {
    set_duration(cfg.idle_timeout);
  } else if (key == "scan_interval") {
    set_duration(cfg.scan_interval);
  } else if (key == "scan_ports_thr") {
    set_count(cfg.scan_ports_thr);
  } else if (key == "scan_hosts_thr") {
    set_count(cfg.scan_hosts_thr);
  } else if (key == "xmeans_k_max") {
    set_count(cfg.xmeans_k_max);
  } else if (key == "seed") {
    auto n = parse_number<std::uint64_t>(value);
    if (!n) throw bad();
    cfg.seed = *n;
  } else {
    throw ConfigError("unknown config key: " + std::string(key));
  }
}

inline constexpr std::array<std::string_view, 18> kConfigKeys{
    "tw_size",           "max_num_tw",        "corr_thr",       "bot_thr",
    "max_tw_score",      "bulky_thr",         "dist_thr",       "internal_prefixes",
    "whitelist_domains", "whitelist_file",    "whitelist_rule", "payload_cap",
    "idle_timeout",      "scan_interval",     "scan_ports_thr", "scan_hosts_thr",
    "xmeans_k_max",      "seed"};

// Flat "key = value" text; '#' starts a comment line. Unknown keys are rejected.
inline Config parse_config(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  for (auto line : detail::split(text, '\n')) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      apply_config_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline std::string to_config_text(const Config& cfg) {
  auto join = [](const auto& items, auto&& fmt) {
    std::string out;
    for (const auto& it : items) {
      if (!out.empty()) out += ',';
      out += fmt(it);
    }
    return out;
  };
  std::ostringstream os;
  os << "tw_size = " << format_duration(cfg.tw_size) << '\n'
     << "max_num_tw = " << cfg.max_num_tw << '\n'
     << "corr_thr = " << detail::format_double(cfg.corr_thr) << '\n'
     << "bot_thr = " << detail::format_double(cfg.bot_thr) << '\n'
     << "max_tw_score = " << detail::format_double(cfg.max_tw_score) << '\n'
     << "bulky_thr = " << cfg.bulky_thr << '\n'
     << "dist_thr = " << detail::format_double(cfg.dist_thr) << '\n'
     << "internal_prefixes = "
     << join(cfg.internal_prefixes, [](const Prefix& p) { return p.to_string(); }) << '\n'
     << "whitelist_domains = "
     << join(cfg.whitelist_domains, [](const std::string& d) { return d; }) << '\n'
     << "whitelist_file = " << cfg.whitelist_file << '\n'
     << "whitelist_rule = " << (cfg.whitelist_rule ? "true" : "false") << '\n'
     << "payload_cap = " << cfg.payload_cap << '\n'
     << "idle_timeout = " << format_duration(cfg.idle_timeout) << '\n'
     << "scan_interval = " << format_duration(cfg.scan_interval) << '\n'
     << "scan_ports_thr = " << cfg.scan_ports_thr << '\n'
     << "scan_hosts_thr = " << cfg.scan_hosts_thr << '\n'
     << "xmeans_k_max = " << cfg.xmeans_k_max << '\n'
     << "seed = " << cfg.seed << '\n';
  return os.str();
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Windows

// Windows are half-open: [epoch + k*tw_size, epoch + (k+1)*tw_size).
inline WindowIndex window_index(Timestamp ts, Timestamp epoch, Micros tw_size) {
  if (ts < epoch) throw InputError("timestamp precedes the trace epoch");
  if (tw_size.count() <= 0) throw InputError("tw_size must be positive");
  return (ts - epoch).count() / tw_size.count();
}

inline Timestamp window_start(WindowIndex w, Timestamp epoch, Micros tw_size) {
  return epoch + tw_size * w;
}

}  // namespace botwatch
