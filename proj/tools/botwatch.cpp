// botwatch: generate synthetic traces, run the detector, score verdicts.
//
//   botwatch generate --spec scenario.json --out trace.jsonl --labels labels.json
//   botwatch run --trace trace.jsonl [--config botwatch.conf] --out outdir
//                [--no-whitelist-rule] [--dump] [--<config key> value ...]
//   botwatch evaluate --report outdir/summary.json --labels labels.json
//   botwatch report --report outdir/summary.json
//
// BOTWATCH_LOG sets log verbosity (trace, debug, info, warn, error, off).

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>

#include "botwatch/botwatch.hpp"

namespace {

using namespace botwatch;

constexpr int kExitInput = 1;
constexpr int kExitConfig = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("botwatch");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^[%l]%$ %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("BOTWATCH_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

int cmd_generate(const std::string& spec_path, const std::string& out, const std::string& labels) {
  auto spec = sim::load_spec(spec_path);
  auto start = std::chrono::steady_clock::now();
  auto trace = sim::generate(spec);
  sim::write(trace, out, labels);
  spdlog::info("generated {} events ({} bots, {} normal hosts) in {:.2f} s", trace.events.size(),
               trace.labels.bots.size(), trace.labels.normal.size(),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return 0;
}

int cmd_run(const std::string& trace, const std::string& config_path, const std::string& out,
            bool no_whitelist_rule, bool dump, const std::map<std::string, std::string>& overrides) {
  Config cfg = config_path.empty() ? Config{} : load_config(config_path);
  for (const auto& [key, value] : overrides) apply_config_setting(cfg, key, value);
  if (no_whitelist_rule) cfg.whitelist_rule = false;
  cfg.validate();

  auto start = std::chrono::steady_clock::now();
  auto summary = run_pipeline(trace, cfg, out, RunOptions{dump});
  auto bots = summary.bots();
  spdlog::info("{} windows, {} hosts scored, {} flagged in {:.2f} s", summary.windows,
               summary.hosts.size(), bots.size(),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  for (auto h : bots) std::cout << h.to_string() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& report, const std::string& labels) {
  auto e = evaluate(load_summary(report), load_labels(labels));
  std::cout << to_json(e).dump(2) << '\n';
  return 0;
}

int cmd_report(const std::string& report) {
  auto s = load_summary(report);
  std::cout << "windows: " << s.windows << "  observed hosts: " << s.observed_hosts.size()
            << "  scored: " << s.hosts.size() << '\n';
  std::cout << "host              final    peak  flagged  first_window\n";
  for (const auto& v : s.hosts) {
    std::string ip = v.host.to_string();
    ip.resize(16, ' ');
    std::cout << ip << "  " << std::setw(6) << v.final_score << "  " << std::setw(6) << v.peak_score
              << "  " << (v.flagged ? "yes    " : "no     ") << "  "
              << (v.first_flagged_window ? std::to_string(*v.first_flagged_window) : "-") << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Netflow and scan-alert correlation botnet detector"};
  app.require_subcommand(1);

  std::string spec, trace_out, labels_out;
  auto* gen = app.add_subcommand("generate", "Generate a synthetic labelled trace");
  gen->add_option("--spec", spec, "Scenario JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", trace_out, "Trace output (JSONL)")->required();
  gen->add_option("--labels", labels_out, "Ground-truth labels output (JSON)")->required();

  std::string trace, config, out_dir;
  bool no_whitelist_rule = false, dump = false;
  std::map<std::string, std::string> overrides;
  auto* run = app.add_subcommand("run", "Run the detection pipeline over a trace");
  run->add_option("--trace", trace, "Trace (JSONL)")->required();
  run->add_option("--config", config, "Configuration file (key = value)");
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--no-whitelist-rule", no_whitelist_rule, "Disable the whitelist filtering rule");
  run->add_flag("--dump", dump, "Also write netflows, alerts and clusters as JSONL");
  for (auto key : kConfigKeys) {
    std::string name(key);
    run->add_option_function<std::string>(
        "--" + name, [&overrides, name](const std::string& v) { overrides[name] = v; },
        "Override config key " + name);
  }

  std::string report, labels;
  auto* eval = app.add_subcommand("evaluate", "Score a run summary against labels");
  eval->add_option("--report", report, "summary.json from a run")->required();
  eval->add_option("--labels", labels, "Labels JSON")->required();

  auto* rep = app.add_subcommand("report", "Print a run summary as a table");
  rep->add_option("--report", report, "summary.json from a run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(spec, trace_out, labels_out);
    if (*run) return cmd_run(trace, config, out_dir, no_whitelist_rule, dump, overrides);
    if (*eval) return cmd_evaluate(report, labels);
    if (*rep) return cmd_report(report);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitInput;
  }
  return 0;
}
