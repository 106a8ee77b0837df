// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "botwatch/botwatch.hpp"

namespace fs = std::filesystem;
using namespace botwatch;
using namespace std::chrono_literals;

namespace {

const fs::path kScenarios = fs::path(BOTWATCH_SOURCE_DIR) / "scenarios";

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("botwatch-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(double v, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

Labels labels_of(const sim::GroundTruth& g) { return {g.bots, g.normal}; }

struct ScenarioRun {
  sim::GroundTruth truth;
  Summary summary;
  Evaluation eval;
  fs::path trace;
  double seconds = 0.0;
};

// Generates the scenario (once per name) and runs the pipeline over it.
ScenarioRun run_scenario(const std::string& name, const Config& cfg, const std::string& tag) {
  static std::map<std::string, sim::GroundTruth> generated;
  auto trace = scratch_dir() / (name + ".jsonl");
  if (!generated.count(name)) {
    auto t = sim::generate(sim::load_spec((kScenarios / (name + ".json")).string()));
    sim::write(t, trace.string(), (scratch_dir() / (name + ".labels.json")).string());
    generated[name] = t.labels;
  }
  ScenarioRun r;
  r.truth = generated[name];
  r.trace = trace;
  auto start = std::chrono::steady_clock::now();
  r.summary = run_pipeline(trace.string(), cfg, scratch_dir() / (name + "-" + tag));
  r.seconds = seconds_since(start);
  r.eval = evaluate(r.summary, labels_of(r.truth));
  return r;
}

// Largest number of active cohort windows before a bot's first flag.
std::optional<WindowIndex> slowest_detection(const ScenarioRun& r) {
  WindowIndex worst = 0;
  for (const auto& cohort : r.truth.cohorts) {
    for (auto h : cohort.hosts) {
      auto w = r.eval.first_detection_window.at(h);
      if (!w || !cohort.onset_window) return std::nullopt;
      worst = std::max(worst, *w - *cohort.onset_window + 1);
    }
  }
  return worst;
}

std::string rate_text(const Evaluation& e) {
  return std::to_string(e.true_positives) + "/" + std::to_string(e.n_bots) + " flagged, FN " +
         std::to_string(e.false_negatives) + ", FP " + std::to_string(e.false_positives);
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  auto start = std::chrono::steady_clock::now();
  auto make = [](std::vector<std::uint32_t> ids) {
    Cluster c;
    for (auto i : ids) c.hosts.push_back(Ipv4(0x0A000000u + i));
    return c;
  };
  bool ok = std::abs(cluster_correlation(make({1, 2}), make({1, 2}), 0, 0) - (1 - std::exp(-2.0))) < 1e-9 &&
            cluster_correlation(make({1, 2}), make({3, 4}), 0, 0) == 0.0 &&
            std::abs(cluster_correlation(make({1, 2, 3}), make({2, 3, 4}), 0, 1) - (1 - std::exp(-0.5))) < 1e-9;
  // Same-window netflow {h,h2,h3} and scan {h,h2}: 1 - e^(-4/3)
  ok = ok && std::abs(cluster_correlation(make({1, 2, 3}), make({1, 2}), 0, 0) -
                      (1 - std::exp(-4.0 / 3.0))) < 1e-9;

  std::mt19937_64 rng(1);
  int failures = 0;
  for (int i = 0; i < 10000; ++i) {
    auto random_cluster = [&] {
      std::set<std::uint32_t> ids;
      auto n = 1 + rng() % 10;
      while (ids.size() < n) ids.insert(static_cast<std::uint32_t>(rng() % 16));
      return make({ids.begin(), ids.end()});
    };
    auto a = random_cluster(), b = random_cluster();
    auto wi = static_cast<WindowIndex>(rng() % 100);
    auto wj = wi + static_cast<WindowIndex>(rng() % 4);
    double v = cluster_correlation(a, b, wi, wj);
    bool disjoint = intersection_size(a.hosts, b.hosts) == 0;
    bool good = v >= 0.0 && v < 1.0 && v == cluster_correlation(b, a, wi, wj) &&
                (v == 0.0) == disjoint &&
                (disjoint || cluster_correlation(a, b, wi, wj + 1) < v);
    failures += !good;
  }
  double secs = seconds_since(start);
  return {ok && failures == 0 && secs < 1.0,
          "closed-form examples " + std::string(ok ? "match" : "MISMATCH") + ", " +
              std::to_string(failures) + "/10000 property failures, " + fmt(secs, 3) + " s"};
}

Outcome criterion_2() {
  auto start = std::chrono::steady_clock::now();
  auto flow = [](std::size_t s, std::size_t r, std::mt19937_64& rng) {
    Netflow f;
    for (std::size_t i = 0; i < s; ++i) f.sent_payload.push_back(static_cast<std::uint8_t>(rng() % 7));
    for (std::size_t i = 0; i < r; ++i) f.recv_payload.push_back(static_cast<std::uint8_t>(rng()));
    return f;
  };
  std::mt19937_64 rng(2);
  auto w = payload_weights(flow(100, 40, rng), flow(200, 60, rng));
  bool example = w.sent == 0.75 && w.recv == 0.25;
  int weight_failures = 0, symmetry_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    auto a = flow(rng() % 300, rng() % 300, rng), b = flow(rng() % 300, rng() % 300, rng);
    auto wt = payload_weights(a, b);
    auto total = a.sent_payload.size() + a.recv_payload.size() + b.sent_payload.size() +
                 b.recv_payload.size();
    if (total > 0 && std::abs(wt.sent + wt.recv - 1.0) > 1e-12) ++weight_failures;
    if (payload_distance(a, b) != payload_distance(b, a)) ++symmetry_failures;
  }
  double secs = seconds_since(start);
  return {example && weight_failures == 0 && symmetry_failures == 0 && secs < 10.0,
          "0.75/0.25 example " + std::string(example ? "exact" : "WRONG") + ", " +
              std::to_string(weight_failures) + " weight-sum and " +
              std::to_string(symmetry_failures) + " symmetry failures over 1000 pairs, " +
              fmt(secs, 3) + " s"};
}

Outcome criterion_3() {
  auto r = run_scenario("irc_persistent", Config{}, "default");
  auto slowest = slowest_detection(r);
  bool pass = r.eval.n_bots == 4 && r.eval.false_negatives == 0 && r.eval.detection_rate == 1.0 &&
              slowest && *slowest <= 7 && r.summary.windows == 90 && r.seconds < 120.0;
  return {pass, rate_text(r.eval) + ", slowest detection after " +
                    (slowest ? std::to_string(*slowest) : std::string("-")) +
                    " active windows (limit 7), " + std::to_string(r.summary.windows) +
                    " windows, " + fmt(r.seconds) + " s"};
}

ScenarioRun periodic_run() {
  static std::optional<ScenarioRun> cached;
  if (!cached) cached = run_scenario("http_periodic", Config{}, "default");
  return *cached;
}

// Scan alerts raised by labelled bots anywhere in the trace.
std::size_t bot_scan_alerts(const ScenarioRun& r) {
  Config cfg;
  ScanDetector detector(cfg);
  std::set<HostId> bots(r.truth.bots.begin(), r.truth.bots.end());
  std::size_t n = 0;
  std::ifstream in(r.trace);
  TraceReader reader(in);
  std::optional<WindowIndex> current;
  auto flush = [&](WindowIndex w) {
    for (const auto& a : detector.detect(w)) n += bots.count(a.host);
  };
  while (auto ev = reader.next()) {
    auto w = window_index(ev->ts, *r.truth.epoch, cfg.tw_size);
    if (current && w != *current) flush(*current);
    current = w;
    detector.add(*ev);
  }
  if (current) flush(*current);
  return n;
}

Outcome criterion_4() {
  auto r = periodic_run();
  auto slowest = slowest_detection(r);
  auto alerts = bot_scan_alerts(r);
  bool pass = r.eval.n_bots == 4 && r.eval.false_negatives == 0 && slowest && *slowest <= 34 &&
              alerts == 0;
  return {pass, rate_text(r.eval) + ", " + std::to_string(alerts) +
                    " scan alerts from bots, slowest detection after " +
                    (slowest ? std::to_string(*slowest) : std::string("-")) +
                    " active windows (limit 34), " + fmt(r.seconds) + " s"};
}

Outcome criterion_5() {
  Config on = load_config((kScenarios / "whitelist.conf").string());
  Config off = on;
  off.whitelist_rule = false;
  auto with_rule = run_scenario("whitelist_sync", on, "rule-on");
  auto without_rule = run_scenario("whitelist_sync", off, "rule-off");
  auto peak = [](const Summary& s, HostId h) {
    for (const auto& v : s.hosts)
      if (v.host == h) return v.peak_score;
    return 0.0;
  };
  bool ordered = !with_rule.truth.synced.empty();
  std::string scores;
  for (auto h : with_rule.truth.synced) {
    double a = peak(with_rule.summary, h), b = peak(without_rule.summary, h);
    ordered = ordered && b >= a;
    scores += " " + h.to_string() + " " + fmt(b, 0) + " vs " + fmt(a, 0) + ";";
  }
  bool pass = with_rule.eval.false_positives == 0 && ordered;
  return {pass, "FP with rule " + std::to_string(with_rule.eval.false_positives) +
                    ", without rule " + std::to_string(without_rule.eval.false_positives) +
                    "; peak score without vs with rule:" + scores};
}

Outcome criterion_6() {
  auto periodic = periodic_run();
  auto jittered = run_scenario("http_jittered", Config{}, "default");
  bool pass = jittered.eval.detection_rate.value_or(0) <= periodic.eval.detection_rate.value_or(0) &&
              jittered.eval.false_positives == 0;
  return {pass, "jittered " + rate_text(jittered.eval) + " (rate " +
                    fmt(jittered.eval.detection_rate.value_or(0)) + ") vs periodic rate " +
                    fmt(periodic.eval.detection_rate.value_or(0))};
}

Outcome criterion_7() {
  // Packet tallies keyed by (endpoint pair, window, sending endpoint).
  using Endpoint = std::pair<Ipv4, std::uint16_t>;
  using Key = std::tuple<Endpoint, Endpoint, WindowIndex, Endpoint>;
  struct Tally {
    std::uint64_t pkts = 0, bytes = 0;
    bool operator==(const Tally&) const = default;
  };
  auto key_of = [](Endpoint a, Endpoint b, WindowIndex w, Endpoint sender) {
    if (b < a) std::swap(a, b);
    return Key{a, b, w, sender};
  };

  int mismatched = 0;
  std::size_t pieces = 0, partial = 0, packets = 0;
  for (int t = 0; t < 100; ++t) {
    sim::ScenarioSpec spec;
    spec.seed = 1000 + static_cast<std::uint64_t>(t);
    spec.duration = Micros(std::chrono::minutes(60 + 17 * (t % 7)));
    spec.n_normal_hosts = 3 + t % 4;
    spec.normal.sessions_per_hour = 30;
    sim::CohortSpec c;
    c.style = t % 2 ? sim::BotStyle::IrcPersistent : sim::BotStyle::HttpJittered;
    c.cc_period = t % 2 ? 4min : 0min;
    c.cc_jitter = 3min;
    c.n_bots = 2;
    spec.cohorts.push_back(c);
    auto trace = sim::generate(spec);
    const Timestamp epoch = *trace.labels.epoch;
    const Micros tw = t % 3 == 0 ? Micros(7min) : Micros(20min);

    std::map<Key, Tally> oracle, assembled;
    for (const auto& ev : trace.events) {
      if (ev.protocol != Protocol::Tcp) continue;
      ++packets;
      auto& s = oracle[key_of({ev.src_ip, ev.src_port}, {ev.dst_ip, ev.dst_port},
                              window_index(ev.ts, epoch, tw), {ev.src_ip, ev.src_port})];
      ++s.pkts;
      s.bytes += ev.payload.size();
    }

    FlowTable table{Config{}};
    WindowIndex current = 0;
    auto close = [&](WindowIndex w) {
      for (const auto& f : table.close_window(w, window_start(w + 1, epoch, tw))) {
        ++pieces;
        partial += f.partial;
        Endpoint a{f.src, f.src_port}, b{f.dst_ip, f.dst_port};
        if (f.sent_pkts) {
          auto& s = assembled[key_of(a, b, f.window, a)];
          s.pkts += f.sent_pkts;
          s.bytes += f.sent_bytes;
        }
        if (f.recv_pkts) {
          auto& s = assembled[key_of(a, b, f.window, b)];
          s.pkts += f.recv_pkts;
          s.bytes += f.recv_bytes;
        }
      }
    };
    for (const auto& ev : trace.events) {
      auto w = window_index(ev.ts, epoch, tw);
      while (current < w) close(current++);
      table.observe(ev);
    }
    close(current);
    mismatched += assembled != oracle;
  }
  return {mismatched == 0, std::to_string(100 - mismatched) + "/100 traces match the per-packet oracle (" +
                               std::to_string(packets) + " TCP packets, " + std::to_string(pieces) +
                               " netflows, " + std::to_string(partial) + " partial)"};
}

Outcome criterion_8() {
  using P = Point<kFlowFeatures>;
  auto blobs = [](std::size_t k, std::uint64_t seed, std::vector<std::size_t>& truth) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<P> pts;
    for (std::size_t c = 0; c < k; ++c) {
      for (int i = 0; i < 50; ++i) {
        P p{};
        for (auto& x : p) x = noise(rng);
        p[c % kFlowFeatures] += 10.0 * static_cast<double>(c + 1);
        pts.push_back(p);
        truth.push_back(c);
      }
    }
    return pts;
  };
  auto exact = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::map<std::size_t, std::size_t> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
      if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
    }
    return true;
  };
  const Config cfg;
  std::vector<std::size_t> t2, t3;
  auto two = blobs(2, 8, t2), three = blobs(3, 9, t3);
  auto r2 = xmeans<kFlowFeatures>(two, cfg.xmeans_k_max, cfg.seed);
  auto r3 = xmeans<kFlowFeatures>(three, cfg.xmeans_k_max, cfg.seed);
  std::vector<P> same(40, P{1, 2, 3, 4, 5, 6, 7, 8});
  auto r1 = xmeans<kFlowFeatures>(same, cfg.xmeans_k_max, cfg.seed);
  bool pass = r2.k == 2 && exact(r2.labels, t2) && r3.k == 3 && exact(r3.labels, t3) && r1.k == 1;
  return {pass, "2 blobs -> K=" + std::to_string(r2.k) + (exact(r2.labels, t2) ? " exact" : " inexact") +
                    ", 3 blobs -> K=" + std::to_string(r3.k) +
                    (exact(r3.labels, t3) ? " exact" : " inexact") +
                    ", identical points -> K=" + std::to_string(r1.k)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion_9() {
  auto trace = periodic_run().trace;
  std::string cli = BOTWATCH_CLI;
  std::vector<fs::path> outs{scratch_dir() / "determinism-a", scratch_dir() / "determinism-b"};
  for (const auto& out : outs) {
    if (cli.empty()) {
      run_pipeline(trace.string(), Config{}, out);
    } else {
      auto cmd = cli + " run --trace " + trace.string() + " --out " + out.string() + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, "`run` exited nonzero"};
    }
  }
  bool same = true;
  std::size_t bytes = 0;
  for (auto f : {"windows.jsonl", "summary.json"}) {
    auto a = slurp(outs[0] / f), b = slurp(outs[1] / f);
    same = same && a == b && !a.empty();
    bytes += a.size();
  }
  return {same, std::string(cli.empty() ? "run_pipeline" : "`botwatch run`") + " twice: reports " +
                    (same ? "byte-identical" : "DIFFER") + " (" + std::to_string(bytes) + " bytes)"};
}

Outcome criterion_10() {
  auto spec = sim::load_spec((kScenarios / "throughput.json").string());
  auto trace = sim::generate(spec);
  if (trace.events.size() < 1'000'000)
    return {false, "scenario produced only " + std::to_string(trace.events.size()) + " events"};
  trace.events.resize(1'000'000);
  auto path = scratch_dir() / "throughput-1m.jsonl";
  {
    std::ofstream out(path);
    write_trace(out, trace.events);
  }
  trace.events = {};
  // The scenario's own deployment config (whitelisted services exempt), then
  // the bare defaults for reference.
  auto timed = [&](const Config& cfg, const char* tag) {
    auto start = std::chrono::steady_clock::now();
    auto summary = run_pipeline(path.string(), cfg, scratch_dir() / tag);
    return std::make_pair(seconds_since(start), summary.windows);
  };
  auto [secs, windows] = timed(load_config((kScenarios / "whitelist.conf").string()), "tp-whitelist");
  auto [default_secs, unused] = timed(Config{}, "tp-default");
  (void)unused;
  return {secs < 60.0, "1,000,000 events over " + std::to_string(windows) + " windows in " +
                           fmt(secs) + " s with the scenario whitelist (limit 60 s); " +
                           fmt(default_secs) + " s with default config; " +
                           std::to_string(std::thread::hardware_concurrency()) +
                           " hardware thread(s)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"correlation degree closed form and properties", criterion_1},
      {"payload weights and distance symmetry", criterion_2},
      {"IRC persistent cohort with scans", criterion_3},
      {"HTTP cohort polling every five minutes", criterion_4},
      {"whitelist ablation for synchronized normal hosts", criterion_5},
      {"HTTP cohort with random 0-10 min waits", criterion_6},
      {"flow assembly conservation", criterion_7},
      {"X-means label recovery", criterion_8},
      {"determinism of run", criterion_9},
      {"throughput on a 1M-event trace", criterion_10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  fs::remove_all(scratch_dir());
  return failed == 0 ? 0 : 1;
}
