// vgw: scenario runner and trace checker.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vgw/harness.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vgw::Error(vgw::Errc::InvalidConfig, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vgw::Error(vgw::Errc::InvalidArgument, "cannot write " + path);
  out << content;
}

void print_summary(const vgw::MetricsReport& r, const std::vector<std::string>& violations) {
  auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("null"); };
  std::cout << "emitted " << r.emitted << "  delivered " << r.delivered << "  lost " << r.lost << "  dropped "
            << r.dropped << "  refused " << r.refused << "\n";
  for (const auto& [d, n] : r.delivered_by_domain) std::cout << "  delivered " << d << ": " << n << "\n";
  std::cout << "latency ms p50 " << show(r.latency_p50_ms) << "  p95 " << show(r.latency_p95_ms) << "  max "
            << show(r.latency_max_ms) << "\n";
  std::cout << "throughput " << r.throughput_msgs_per_s << " msg/s  overhead " << show(r.overhead) << "\n";
  for (const auto& [p, s] : r.sequences) {
    std::cout << "sequence " << p << ": " << s.status;
    if (!s.reason.empty()) std::cout << " (" << s.reason << ")";
    std::cout << "\n";
  }
  std::cout << "wall " << r.wall_seconds << " s\n";
  if (violations.empty()) {
    std::cout << "verify_trace: pass\n";
  } else {
    for (const auto& v : violations) std::cout << "verify_trace: " << v << "\n";
  }
}

int run(vgw::ScenarioConfig cfg, const std::string& out, const std::string& trace) {
  const auto result = vgw::run_scenario(cfg);
  if (!out.empty()) write_file(out, result.report.to_json().dump(2) + "\n");
  if (!trace.empty()) write_file(trace, result.trace_jsonl);
  print_summary(result.report, result.violations);
  result.require_pass();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vgw - NFV-based VWSN gateway scenario runner"};
  app.require_subcommand(1);

  std::string config_path, clock, processes, out, trace;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario from a JSON config");
  run_cmd->add_option("--config", config_path, "Scenario config (JSON)")->required();
  run_cmd->add_option("--clock", clock, "virtual or real")->check(CLI::IsMember({"virtual", "real"}));
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Scenario seed");
  run_cmd->add_option("--out", out, "Write the metrics report here");
  run_cmd->add_option("--trace", trace, "Write the JSON-lines trace here");
  run_cmd->add_option("--processes", processes, "single or split")->check(CLI::IsMember({"single", "split"}));

  std::string verify_path;
  auto* verify_cmd = app.add_subcommand("verify", "Check a recorded trace");
  verify_cmd->add_option("--trace", verify_path, "JSON-lines trace")->required();

  std::string demo_out, demo_trace;
  auto* demo_cmd = app.add_subcommand("demo-prototype", "6 BrandA + 2 BrandB sensors for 60 virtual seconds");
  demo_cmd->add_option("--out", demo_out, "Write the metrics report here");
  demo_cmd->add_option("--trace", demo_trace, "Write the JSON-lines trace here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto cfg = vgw::ScenarioConfig::from_json(vgw::Json::parse(slurp(config_path)));
      if (!clock.empty()) cfg.clock = vgw::clock_mode_from_string(clock);
      if (!processes.empty()) cfg.processes = vgw::process_mode_from_string(processes);
      if (cfg.processes == vgw::ProcessMode::Split) cfg.clock = vgw::ClockMode::Real;
      if (*seed_opt) cfg.seed = seed;
      return run(cfg, out, trace);
    }
    if (*verify_cmd) {
      const auto violations = vgw::verify_trace(vgw::Trace::parse_jsonl(slurp(verify_path)));
      if (violations.empty()) {
        std::cout << "pass\n";
        return 0;
      }
      for (const auto& v : violations) std::cout << v << "\n";
      return 1;
    }
    if (*demo_cmd) return run(vgw::ScenarioConfig::prototype(), demo_out, demo_trace);
  } catch (const vgw::Error& e) {
    std::cerr << "vgw: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "vgw: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
