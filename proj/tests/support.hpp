#pragma once

#include <random>
#include <string>
#include <string_view>

#include "botwatch/model.hpp"

namespace botwatch::test {

inline Ipv4 ip(std::string_view s) { return *Ipv4::parse(s); }

inline Timestamp at(double seconds) {
  return Micros(static_cast<std::int64_t>(seconds * 1e6));
}

inline Bytes bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline Bytes filler(std::size_t n, std::uint8_t v = 'x') { return Bytes(n, v); }

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& c : b) c = static_cast<std::uint8_t>(rng());
  return b;
}

inline PacketEvent tcp(Timestamp ts, std::string_view src, std::uint16_t sport, std::string_view dst,
                       std::uint16_t dport, std::string_view flags = "A", Bytes payload = {}) {
  PacketEvent ev;
  ev.ts = ts;
  ev.protocol = Protocol::Tcp;
  ev.src_ip = ip(src);
  ev.dst_ip = ip(dst);
  ev.src_port = sport;
  ev.dst_port = dport;
  ev.flags = *TcpFlags::parse(flags);
  ev.payload = std::move(payload);
  return ev;
}

inline PacketEvent udp(Timestamp ts, std::string_view src, std::uint16_t sport, std::string_view dst,
                       std::uint16_t dport) {
  PacketEvent ev;
  ev.ts = ts;
  ev.protocol = Protocol::Udp;
  ev.src_ip = ip(src);
  ev.dst_ip = ip(dst);
  ev.src_port = sport;
  ev.dst_port = dport;
  return ev;
}

inline PacketEvent icmp(Timestamp ts, std::string_view src, std::string_view dst) {
  PacketEvent ev;
  ev.ts = ts;
  ev.protocol = Protocol::Icmp;
  ev.src_ip = ip(src);
  ev.dst_ip = ip(dst);
  return ev;
}

inline PacketEvent dns_response(Timestamp ts, std::string qname, std::vector<Ipv4> answers) {
  PacketEvent ev;
  ev.ts = ts;
  ev.protocol = Protocol::Dns;
  ev.src_ip = ip("192.0.2.53");
  ev.src_port = 53;
  ev.dst_ip = ip("10.0.0.5");
  ev.dst_port = 40000;
  ev.dns = DnsRecord{std::move(qname), std::move(answers), true};
  return ev;
}

inline Cluster cluster(std::string id, WindowIndex w, ClusterKind kind,
                       std::vector<std::string_view> hosts) {
  Cluster c;
  c.cluster_id = std::move(id);
  c.window = w;
  c.kind = kind;
  for (auto h : hosts) c.hosts.push_back(ip(h));
  std::sort(c.hosts.begin(), c.hosts.end());
  c.hosts.erase(std::unique(c.hosts.begin(), c.hosts.end()), c.hosts.end());
  return c;
}

}  // namespace botwatch::test
