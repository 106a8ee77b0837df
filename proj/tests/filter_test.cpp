#include <gtest/gtest.h>

#include "botwatch/filter.hpp"
#include "support.hpp"

using namespace botwatch;
using test::at;
using test::ip;

namespace {

Netflow flow(std::string_view src, std::string_view dst, std::uint64_t sent, std::uint64_t recv) {
  Netflow f;
  f.src = ip(src);
  f.dst_ip = ip(dst);
  f.src_port = 40000;
  f.dst_port = 80;
  f.sent_pkts = 1;
  f.recv_pkts = 1;
  f.sent_bytes = sent;
  f.recv_bytes = recv;
  return f;
}

ScanAlert alert(std::string_view host) {
  ScanAlert a;
  a.host = ip(host);
  return a;
}

DomainIpMap google_map() {
  DomainIpMap map;
  map.record_dns(test::dns_response(at(1), "www.google.com", {ip("142.250.1.1")}));
  return map;
}

}  // namespace

TEST(FilterNetflows, InternalToInternalDropped) {
  Config cfg;
  DomainIpMap map;
  EXPECT_EQ(flow_drop_reason(flow("10.0.0.1", "10.0.0.2", 10, 10), map, cfg),
            FlowRule::InternalOrInbound);
  EXPECT_EQ(flow_drop_reason(flow("8.8.8.8", "10.0.0.2", 10, 10), map, cfg),
            FlowRule::InternalOrInbound);
  EXPECT_EQ(flow_drop_reason(flow("10.0.0.1", "8.8.8.8", 10, 10), map, cfg), std::nullopt);
}

TEST(FilterNetflows, EmptyFlowsDropped) {
  EXPECT_EQ(flow_drop_reason(flow("10.0.0.1", "8.8.8.8", 0, 0), DomainIpMap{}, Config{}),
            FlowRule::NoPayload);
}

TEST(FilterNetflows, BulkyDownloadDropped) {
  Config cfg;
  cfg.bulky_thr = 1u << 20;
  EXPECT_EQ(flow_drop_reason(flow("10.0.0.1", "8.8.8.8", 300, 2u << 20), DomainIpMap{}, cfg),
            FlowRule::Bulky);
  EXPECT_EQ(flow_drop_reason(flow("10.0.0.1", "8.8.8.8", 0, 1u << 20), DomainIpMap{}, cfg),
            std::nullopt);
}

TEST(FilterNetflows, WhitelistRuleToggles) {
  Config cfg;
  cfg.whitelist_domains = {"google.com"};
  auto map = google_map();
  auto f = flow("10.0.0.1", "142.250.1.1", 100, 100);
  EXPECT_EQ(flow_drop_reason(f, map, cfg), FlowRule::Whitelisted);
  cfg.whitelist_rule = false;
  EXPECT_EQ(flow_drop_reason(f, map, cfg), std::nullopt);
}

TEST(FilterNetflows, IdempotentOrderFreeSubset) {
  std::mt19937_64 rng(4);
  Config cfg;
  cfg.whitelist_domains = {"google.com"};
  auto map = google_map();
  const char* srcs[] = {"10.0.0.1", "10.0.0.2", "8.8.8.8"};
  const char* dsts[] = {"10.0.0.3", "142.250.1.1", "93.184.216.34", "1.1.1.1"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Netflow> flows;
    for (int i = 0; i < 40; ++i) {
      auto f = flow(srcs[rng() % 3], dsts[rng() % 4], rng() % 3 == 0 ? 0 : rng() % 2'000'000,
                    rng() % 2 == 0 ? 0 : rng() % 2'000'000);
      f.flow_id = static_cast<std::uint64_t>(i);
      flows.push_back(f);
    }
    auto once = filter_netflows(flows, map, cfg);
    EXPECT_EQ(filter_netflows(once, map, cfg), once);

    auto shuffled = flows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto other = filter_netflows(shuffled, map, cfg);
    auto ids = [](const std::vector<Netflow>& v) {
      std::set<std::uint64_t> s;
      for (const auto& f : v) s.insert(f.flow_id);
      return s;
    };
    EXPECT_EQ(ids(other), ids(once));

    auto without_whitelist = cfg;
    without_whitelist.whitelist_rule = false;
    auto loose = ids(filter_netflows(flows, map, without_whitelist));
    auto strict = ids(once);
    EXPECT_TRUE(std::includes(loose.begin(), loose.end(), strict.begin(), strict.end()));
  }
}

TEST(FilterAlerts, KeepsInternalScanners) {
  Config cfg;
  std::vector<ScanAlert> alerts{alert("203.0.113.5"), alert("10.0.0.9")};
  auto kept = filter_alerts(alerts, cfg);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].host, ip("10.0.0.9"));
  EXPECT_TRUE(filter_alerts(std::vector<ScanAlert>{}, cfg).empty());
}
