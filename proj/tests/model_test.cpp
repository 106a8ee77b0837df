#include <gtest/gtest.h>

#include "botwatch/model.hpp"
#include "support.hpp"

using namespace botwatch;
using namespace std::chrono_literals;
using test::ip;

TEST(Window, IndexBoundaries) {
  const Timestamp epoch = test::at(1000);
  EXPECT_EQ(window_index(epoch, epoch, 20min), 0);
  EXPECT_EQ(window_index(epoch + 20min - 1us, epoch, 20min), 0);
  EXPECT_EQ(window_index(epoch + 20min, epoch, 20min), 1);
  EXPECT_EQ(window_index(epoch + 61min, epoch, 20min), 3);
}

TEST(Window, BeforeEpochIsRejected) {
  EXPECT_THROW(window_index(test::at(5), test::at(10), 20min), InputError);
}

TEST(Window, HalfOpenIntervalsPartitionTime) {
  std::mt19937_64 rng(3);
  const Timestamp epoch = test::at(12345);
  for (int i = 0; i < 10000; ++i) {
    Micros tw(1 + static_cast<std::int64_t>(rng() % 5'000'000'000ULL));
    Timestamp ts = epoch + Micros(static_cast<std::int64_t>(rng() % 100'000'000'000ULL));
    auto w = window_index(ts, epoch, tw);
    EXPECT_LE(window_start(w, epoch, tw), ts);
    EXPECT_LT(ts, window_start(w + 1, epoch, tw));
  }
}

TEST(Ipv4, ParseAndFormat) {
  auto a = Ipv4::parse("10.1.2.3");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->value(), 0x0A010203u);
  EXPECT_EQ(a->to_string(), "10.1.2.3");
  EXPECT_FALSE(Ipv4::parse("10.1.2"));
  EXPECT_FALSE(Ipv4::parse("10.1.2.256"));
  EXPECT_FALSE(Ipv4::parse("10.1.2.x"));
  EXPECT_FALSE(Ipv4::parse("1.2.3.4.5"));
}

TEST(Prefix, Containment) {
  auto p = Prefix::parse("172.16.0.0/12");
  ASSERT_TRUE(p);
  EXPECT_TRUE(p->contains(ip("172.31.255.1")));
  EXPECT_FALSE(p->contains(ip("172.32.0.1")));
  EXPECT_EQ(Prefix::parse("10.1.2.3/8")->to_string(), "10.0.0.0/8");
  EXPECT_FALSE(Prefix::parse("10.0.0.0/33"));
}

TEST(TcpFlags, ParseSubsets) {
  auto f = TcpFlags::parse("SA");
  ASSERT_TRUE(f);
  EXPECT_TRUE(f->syn && f->ack && !f->fin && !f->rst);
  EXPECT_EQ(TcpFlags::parse("")->to_string(), "");
  EXPECT_FALSE(TcpFlags::parse("SS"));
  EXPECT_FALSE(TcpFlags::parse("X"));
}

TEST(Config, DefaultsMatchPublishedConstants) {
  Config c;
  EXPECT_EQ(c.tw_size, 20min);
  EXPECT_EQ(c.max_num_tw, 3);
  EXPECT_DOUBLE_EQ(c.corr_thr, 0.65);
  EXPECT_DOUBLE_EQ(c.bot_thr, 33.0);
  EXPECT_DOUBLE_EQ(c.max_tw_score, 5.0);
  EXPECT_DOUBLE_EQ(c.dist_thr, 0.35);
  EXPECT_EQ(c.bulky_thr, 1u << 20);
  EXPECT_TRUE(c.is_internal(ip("192.168.4.4")));
  EXPECT_FALSE(c.is_internal(ip("8.8.8.8")));
}

TEST(Config, TextRoundTrip) {
  Config c;
  c.tw_size = 90s;
  c.corr_thr = 0.7;
  c.bot_thr = 12.5;
  c.bulky_thr = 3u << 20;
  c.internal_prefixes = {*Prefix::parse("10.0.0.0/8")};
  c.whitelist_domains = {"google.com", "example.org"};
  c.whitelist_rule = false;
  c.payload_cap = 512;
  c.seed = 99;
  auto back = parse_config(to_config_text(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(parse_config(to_config_text(Config{})), Config{});
}

TEST(Config, RandomRoundTrips) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 500; ++i) {
    Config c;
    c.tw_size = Micros(1 + static_cast<std::int64_t>(rng() % 10'000'000'000ULL));
    c.max_num_tw = static_cast<int>(rng() % 10);
    c.corr_thr = 0.01 + 0.98 * static_cast<double>(rng() % 1000) / 1000.0;
    c.bot_thr = 1.0 + static_cast<double>(rng() % 100000) / 7.0;
    c.dist_thr = 0.01 + 0.99 * static_cast<double>(rng() % 997) / 997.0;
    c.bulky_thr = 1 + rng() % (1ULL << 40);
    c.idle_timeout = Micros(1 + static_cast<std::int64_t>(rng() % 1'000'000'000));
    c.seed = rng();
    ASSERT_EQ(parse_config(to_config_text(c)), c) << to_config_text(c);
  }
}

TEST(Config, ParsesUnitsAndComments) {
  auto c = parse_config(
      "# comment\n"
      "tw_size = 5m\n"
      "bulky_thr = 2MB\n"
      "whitelist_domains = Google.com, example.org\n"
      "internal_prefixes = 10.0.0.0/8\n"
      "whitelist_rule = off\n");
  EXPECT_EQ(c.tw_size, 5min);
  EXPECT_EQ(c.bulky_thr, 2u << 20);
  EXPECT_EQ(c.whitelist_domains, (std::vector<std::string>{"google.com", "example.org"}));
  EXPECT_FALSE(c.whitelist_rule);
  EXPECT_FALSE(c.is_internal(ip("192.168.1.1")));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("nonsense = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("tw_size\n"), ConfigError);
  EXPECT_THROW(parse_config("corr_thr = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("tw_size = 0s\n"), ConfigError);
  EXPECT_THROW(parse_config("bulky_thr = lots\n"), ConfigError);
  EXPECT_THROW(parse_config("internal_prefixes = 10.0.0.0/40\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/botwatch.conf"), ConfigError);
}

TEST(Durations, ParseAndFormat) {
  EXPECT_EQ(parse_duration("20m"), Micros(20min));
  EXPECT_EQ(parse_duration("1500ms"), Micros(1500ms));
  EXPECT_EQ(parse_duration("7"), Micros(7s));
  EXPECT_EQ(parse_duration("2h"), Micros(2h));
  EXPECT_FALSE(parse_duration("m"));
  EXPECT_FALSE(parse_duration("5 parsecs"));
  for (Micros d : {Micros(1), Micros(1500ms), Micros(20min), Micros(3h), Micros(61s)})
    EXPECT_EQ(parse_duration(format_duration(d)), d);
}
