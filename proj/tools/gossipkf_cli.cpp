// Command-line front end: validate, run, sweep-k, analyze, schedule, echo.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gossipkf/analysis.hpp"
#include "gossipkf/errors.hpp"
#include "gossipkf/report.hpp"
#include "gossipkf/scenario.hpp"
#include "gossipkf/scheduler.hpp"
#include "gossipkf/sim.hpp"

namespace {

using namespace gossipkf;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<int> runs;
  std::string k;
  std::string method = "exact";
  std::string strategy;
};

/// Parses the scenario and applies command-line overrides.
ScenarioConfig load(const Options& opt) {
  ScenarioConfig config = parse_scenario(opt.config);
  for (const auto& issue : validate_topology(config.topology))
    if (!issue.is_error()) std::cerr << "warning: " << issue.message << "\n";
  if (opt.seed) config.base_seed = *opt.seed;
  if (opt.runs) config.runs = *opt.runs;
  if (!opt.strategy.empty()) config.strategy = parse_strategy(opt.strategy);
  if (opt.k == "auto") {
    config.auto_rounds = true;
  } else if (!opt.k.empty()) {
    std::size_t used = 0;
    int k = -1;
    try {
      k = std::stoi(opt.k, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != opt.k.size() || k < 0) throw ValidationError("--k must be a nonnegative integer or 'auto'");
    config.auto_rounds = false;
    config.rounds = k;
  }
  finalize_scenario(config);
  return config;
}

void prepare_output(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory '" + dir + "'");
}

RunManifest start_manifest(const std::string& command, const Options& opt,
                           const ScenarioConfig& config) {
  prepare_output(opt.out);
  RunManifest manifest;
  manifest.command = command;
  manifest.config_path = opt.config;
  manifest.seed = config.base_seed;
  manifest.out_dir = opt.out;
  manifest.settings = {{"config_fnv1a64", hex64(fnv1a64(read_file(opt.config)))},
                       {"K", std::to_string(config.rounds)},
                       {"runs", std::to_string(config.runs)},
                       {"horizon", std::to_string(config.horizon)},
                       {"strategy", to_string(config.strategy)}};
  manifest.write();
  return manifest;
}

/// Mean of `v` over its last `window` entries.
double tail_mean(const Vector& v, int window) {
  const int w = std::min<int>(window, static_cast<int>(v.size()));
  return v.tail(w).mean();
}

int cmd_validate(const Options& opt) {
  const ScenarioConfig config = load(opt);
  std::cout << "ok: " << config.nodes() << " nodes, state dimension " << config.model.dim()
            << ", K=" << config.rounds << "\n";
  return 0;
}

int cmd_run(const Options& opt) {
  const ScenarioConfig config = load(opt);
  RunManifest manifest = start_manifest("run", opt, config);
  const MonteCarloResult mc = monte_carlo(config);
  manifest.add_artifact("metrics.csv", metrics_csv(mc.mean));
  manifest.write();
  return 0;
}

int cmd_sweep(const Options& opt) {
  ScenarioConfig config = load(opt);
  RunManifest manifest = start_manifest("sweep-k", opt, config);
  std::string csv = "K,msee_ave,disagreement\n";
  for (int k = 1; k <= 41; k += 5) {
    config.auto_rounds = false;
    config.rounds = k;
    const MonteCarloResult mc = monte_carlo(config);
    csv += std::to_string(k) + "," + format_number(tail_mean(mc.mean.msee_ave, 20)) + "," +
           format_number(tail_mean(mc.mean.disagreement, 20)) + "\n";
  }
  manifest.add_artifact("sweep.csv", csv);
  manifest.write();
  return 0;
}

int cmd_analyze(const Options& opt) {
  const ScenarioConfig config = load(opt);
  if (config.nodes() < 2) throw ValidationError("analyze needs at least two nodes");
  if (config.rounds < 1) throw ValidationError("analyze needs K >= 1");
  RunManifest manifest = start_manifest("analyze", opt, config);
  const auto sensors = effective_sensors(config);
  const SteadyErrorSystem sys = build_steady_error_system(config.model, sensors, config.topology);

  AnalysisReport report;
  report.lambda2 = second_eigenvalue(expected_matrix(config.plan));
  report.averaging_time = averaging_time(0.01, report.lambda2);
  report.rounds = config.rounds;
  report.orthogonality_deviation = orthogonality_check(sys).deviation;
  const FixedPointResult fp = fixed_point_covariance(sys, config.plan, config.rounds, 1e-12, 1000000);
  report.fixed_point_trace = fp.sigma.trace();
  report.contraction_ratio = fp.contraction_ratio;
  report.fixed_point_iterations = fp.iterations;
  // Every node starts from the same zero estimate, so the initial errors coincide.
  const Matrix start = kron(Matrix::Ones(config.nodes(), config.nodes()), config.model.Pi0);
  report.series = trace_comparison_series(sys, config.plan, config.rounds, config.horizon, start);

  manifest.add_artifact("analysis.csv", analysis_csv(report));
  manifest.write();
  return 0;
}

int cmd_schedule(const Options& opt) {
  const ScenarioConfig config = load(opt);
  if (!config.budget) throw ValidationError("schedule needs a [budget] section");
  ScheduleMethod method;
  if (opt.method == "exact") {
    method = ScheduleMethod::kExact;
  } else if (opt.method == "greedy") {
    method = ScheduleMethod::kGreedy;
  } else {
    throw ValidationError("unknown method '" + opt.method + "'");
  }
  RunManifest manifest = start_manifest("schedule", opt, config);
  manifest.settings.emplace_back("method", opt.method);
  const ScheduleResult result = solve_network(config.model, effective_sensors(config),
                                              config.topology, *config.budget, config.plan, method);
  manifest.add_artifact("schedule.csv", schedule_csv(result));
  manifest.write();
  return 0;
}

int cmd_echo(const Options& opt) {
  std::cout << emit_scenario(load(opt));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized-gossip distributed Kalman filtering"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "scenario file")->required();
    sub->add_option("--seed", opt.seed, "base seed (overrides the scenario)");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--runs", opt.runs, "Monte-Carlo runs")->check(CLI::PositiveNumber);
    sub->add_option("--k", opt.k, "gossip rounds per step, or 'auto'");
    sub->add_option("--strategy", opt.strategy,
                    "centralized|decentralized|algorithm1|algorithm2|no-consensus");
  };

  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const std::vector<Command> commands = {
      {"validate", "check a scenario file", cmd_validate},
      {"run", "Monte-Carlo experiment, writes metrics.csv", cmd_run},
      {"sweep-k", "steady-state metrics for K = 1, 6, ..., 41", cmd_sweep},
      {"analyze", "error-covariance analysis, writes analysis.csv", cmd_analyze},
      {"schedule", "power-constrained link selection, writes schedule.csv", cmd_schedule},
      {"echo", "print the scenario in canonical form", cmd_echo},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "schedule")
      sub->add_option("--method", opt.method, "exact|greedy");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    for (std::size_t i = 0; i < commands.size(); ++i)
      if (subs[i]->parsed()) return commands[i].fn(opt);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitValidation;
}
