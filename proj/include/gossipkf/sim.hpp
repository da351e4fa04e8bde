#pragma once

// Monte-Carlo experiments: ground truth, noisy measurements, strategy
// execution and the error metrics (per-node MSEE, average MSEE, disagreement).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gossipkf/errors.hpp"
#include "gossipkf/filters.hpp"
#include "gossipkf/gossip.hpp"
#include "gossipkf/linalg.hpp"
#include "gossipkf/model.hpp"
#include "gossipkf/random.hpp"
#include "gossipkf/scheduler.hpp"

namespace gossipkf {

enum class Strategy { kCentralized, kDecentralized, kAlgorithm1, kAlgorithm2, kNoConsensus };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kCentralized: return "centralized";
    case Strategy::kDecentralized: return "decentralized";
    case Strategy::kAlgorithm1: return "algorithm1";
    case Strategy::kAlgorithm2: return "algorithm2";
    case Strategy::kNoConsensus: return "no-consensus";
  }
  return "unknown";
}

inline Strategy parse_strategy(const std::string& name) {
  for (Strategy s : {Strategy::kCentralized, Strategy::kDecentralized, Strategy::kAlgorithm1,
                     Strategy::kAlgorithm2, Strategy::kNoConsensus})
    if (to_string(s) == name) return s;
  throw ValidationError("unknown strategy '" + name + "'");
}

/// Scalar gain upsilon applied to a sensor's output matrix (C_eff = upsilon C).
struct SensorGain {
  enum class Kind { kUnit, kFixed, kRandom };
  Kind kind = Kind::kUnit;
  double value = 1.0;

  bool operator==(const SensorGain&) const = default;
};

struct ScenarioConfig {
  StateModel model;
  std::vector<SensorModel> sensors;  // output matrices before the gains
  std::vector<SensorGain> gains;
  Topology topology;
  std::optional<Matrix> explicit_plan;  // overrides the uniform plan
  GossipPlan plan;
  bool auto_rounds = false;
  int rounds = 0;  // K
  int horizon = 100;
  int runs = 100;
  std::uint64_t base_seed = 0;
  Strategy strategy = Strategy::kAlgorithm2;
  std::optional<PowerBudget> budget;

  int nodes() const { return topology.size(); }
};

/// Random gains are drawn once per campaign from (0, 1] using the base seed, one
/// draw per sensor in index order, and frozen across runs.
inline std::vector<double> resolve_gains(const std::vector<SensorGain>& gains,
                                         std::uint64_t base_seed) {
  Rng rng = Rng(base_seed).split(Stream::kSensorGain);
  std::vector<double> out;
  for (const auto& g : gains) {
    const double draw = 1.0 - rng.uniform();
    switch (g.kind) {
      case SensorGain::Kind::kUnit: out.push_back(1.0); break;
      case SensorGain::Kind::kFixed: out.push_back(g.value); break;
      case SensorGain::Kind::kRandom: out.push_back(draw); break;
    }
  }
  return out;
}

inline std::vector<SensorModel> effective_sensors(const ScenarioConfig& config) {
  std::vector<SensorModel> out = config.sensors;
  if (config.gains.empty()) return out;
  const std::vector<double> g = resolve_gains(config.gains, config.base_seed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].C *= g.at(i);
  return out;
}

/// Checks every module invariant of a resolved scenario.
inline void validate(const ScenarioConfig& config) {
  validate(config.model);
  require_valid(config.topology);
  const int n = config.nodes();
  if (static_cast<int>(config.sensors.size()) != n)
    throw ValidationError("scenario has " + std::to_string(config.sensors.size()) +
                          " sensors but the topology has " + std::to_string(n) + " nodes");
  if (!config.gains.empty() && static_cast<int>(config.gains.size()) != n)
    throw ValidationError("one gain per sensor required");
  for (const auto& g : config.gains)
    if (g.kind == SensorGain::Kind::kFixed && !(g.value > 0.0 && g.value <= 1.0))
      throw ValidationError("sensor gain must lie in (0, 1]");
  const auto sensors = effective_sensors(config);
  for (int i = 0; i < n; ++i) validate(sensors[i], config.model, i);
  validate(config.plan, config.topology);
  if (config.rounds < 0) throw ValidationError("K must be nonnegative");
  if (config.horizon < 1) throw ValidationError("horizon must be at least 1");
  if (config.runs < 1) throw ValidationError("runs must be at least 1");
  if (config.strategy == Strategy::kAlgorithm1 && config.rounds < 1)
    throw ValidationError("algorithm1 needs K >= 1");
  if (config.budget) validate(*config.budget, n);
}

/// x(0) ~ N(0, Pi0), x(k+1) = A x(k) + w(k); returns x(0..horizon-1).
inline std::vector<Vector> simulate_truth(const StateModel& model, int horizon, Rng& rng) {
  const Matrix sqrt_pi0 = psd_sqrt(model.Pi0);
  const Matrix sqrt_q = psd_sqrt(model.Q);
  std::vector<Vector> xs;
  xs.reserve(static_cast<std::size_t>(horizon));
  Vector x = rng.gaussian(sqrt_pi0);
  for (int k = 0; k < horizon; ++k) {
    xs.push_back(x);
    x = model.A * x + rng.gaussian(sqrt_q);
  }
  return xs;
}

/// y_i(k) = C_i x(k) + v_i(k); result[k][i].
inline std::vector<std::vector<Vector>> simulate_measurements(
    const std::vector<Vector>& trajectory, const std::vector<SensorModel>& sensors, Rng& rng) {
  std::vector<Matrix> sqrt_r;
  for (const auto& s : sensors) sqrt_r.push_back(psd_sqrt(s.R));
  std::vector<std::vector<Vector>> out;
  out.reserve(trajectory.size());
  for (const auto& x : trajectory) {
    std::vector<Vector> ys;
    for (std::size_t i = 0; i < sensors.size(); ++i)
      ys.push_back(sensors[i].C * x + rng.gaussian(sqrt_r[i]));
    out.push_back(std::move(ys));
  }
  return out;
}

/// ||x - x_hat||^2
inline double msee(const Vector& truth, const Vector& estimate) {
  if (truth.size() != estimate.size()) throw ValidationError("msee: dimension mismatch");
  return (truth - estimate).squaredNorm();
}

inline double msee_average(const std::vector<double>& per_node) {
  if (per_node.empty()) return 0.0;
  double sum = 0.0;
  for (double v : per_node) sum += v;
  return sum / static_cast<double>(per_node.size());
}

/// (sum_i ||x_i - x_A||^2)^{1/2} with x_A the across-node mean.
inline double disagreement(const std::vector<Vector>& estimates) {
  if (estimates.empty()) throw ValidationError("disagreement: no estimates");
  Vector mean = Vector::Zero(estimates.front().size());
  for (const auto& e : estimates) mean += e;
  mean /= static_cast<double>(estimates.size());
  double sum = 0.0;
  for (const auto& e : estimates) sum += (e - mean).squaredNorm();
  return std::sqrt(sum);
}

/// Row k of each matrix is time step k.
struct MetricSeries {
  Matrix msee;          // horizon x n
  Vector msee_ave;      // horizon
  Vector disagreement;  // horizon
  Matrix trace_P;       // horizon x n, trace of the posterior covariance

  int horizon() const { return static_cast<int>(msee.rows()); }
  int nodes() const { return static_cast<int>(msee.cols()); }

  static MetricSeries zeros(int horizon, int nodes) {
    return {Matrix::Zero(horizon, nodes), Vector::Zero(horizon), Vector::Zero(horizon),
            Matrix::Zero(horizon, nodes)};
  }

  bool operator==(const MetricSeries& o) const {
    return msee == o.msee && msee_ave == o.msee_ave && disagreement == o.disagreement &&
           trace_P == o.trace_P;
  }
};

/// One run with `seed`; truth, measurement and gossip randomness come from
/// separate sub-streams so strategies compared under one seed see the same data.
inline MetricSeries run_experiment(const ScenarioConfig& config, std::uint64_t seed) {
  const int n = config.nodes();
  const int horizon = config.horizon;
  const auto sensors = effective_sensors(config);
  const Rng root(seed);
  Rng truth_rng = root.split(Stream::kTruth);
  Rng meas_rng = root.split(Stream::kMeasurement);
  Rng gossip_rng = root.split(Stream::kGossip);

  const auto truth = simulate_truth(config.model, horizon, truth_rng);
  const auto measurements = simulate_measurements(truth, sensors, meas_rng);

  MetricSeries series = MetricSeries::zeros(horizon, n);
  FilterState central = initial_state(config.model.Pi0);
  FilterBank bank = config.strategy == Strategy::kAlgorithm1
                        ? algorithm1_initial_bank(config.model, n)
                        : initial_bank(n, config.model.Pi0);

  for (int k = 0; k < horizon; ++k) {
    std::vector<Vector> estimates(static_cast<std::size_t>(n));
    std::vector<double> traces(static_cast<std::size_t>(n));
    switch (config.strategy) {
      case Strategy::kCentralized:
        central = centralized_reference_step(std::move(central), config.model, sensors,
                                             measurements[k]);
        for (int i = 0; i < n; ++i) {
          estimates[i] = central.x_post;
          traces[i] = central.P_post.trace();
        }
        break;
      case Strategy::kDecentralized:
      case Strategy::kNoConsensus:
        bank = decentralized_step(std::move(bank), config.model, config.topology, sensors,
                                  measurements[k]);
        break;
      case Strategy::kAlgorithm1:
        bank = algorithm1_step(std::move(bank), config.model, sensors, measurements[k],
                               RandomizedGossip{&config.plan, config.rounds, &gossip_rng});
        break;
      case Strategy::kAlgorithm2:
        bank = algorithm2_step(std::move(bank), config.model, config.topology, config.plan,
                               config.rounds, sensors, measurements[k], gossip_rng);
        break;
    }
    if (config.strategy != Strategy::kCentralized) {
      // Algorithm 1 carries n-scaled covariances.
      const double scale = config.strategy == Strategy::kAlgorithm1 ? 1.0 / n : 1.0;
      for (int i = 0; i < n; ++i) {
        estimates[i] = bank[i].x_post;
        traces[i] = scale * bank[i].P_post.trace();
      }
    }
    std::vector<double> errors(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      errors[i] = msee(truth[k], estimates[i]);
      series.msee(k, i) = errors[i];
      series.trace_P(k, i) = traces[i];
    }
    series.msee_ave(k) = msee_average(errors);
    series.disagreement(k) = disagreement(estimates);
  }
  return series;
}

inline MetricSeries run_experiment(const ScenarioConfig& config) {
  return run_experiment(config, config.base_seed);
}

struct MonteCarloResult {
  MetricSeries mean;
  std::vector<std::uint64_t> seeds;
};

/// Run r uses seed base_seed + r; metrics are averaged pointwise, summing in
/// run-index order.
inline MonteCarloResult monte_carlo(const ScenarioConfig& config) {
  if (config.runs < 1) throw ValidationError("runs must be at least 1");
  MonteCarloResult result;
  result.mean = MetricSeries::zeros(config.horizon, config.nodes());
  for (int r = 0; r < config.runs; ++r) {
    const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(r);
    result.seeds.push_back(seed);
    MetricSeries s;
    try {
      s = run_experiment(config, seed);
    } catch (const NumericalError& e) {
      throw NumericalError("run " + std::to_string(r) + ": " + e.what());
    }
    result.mean.msee += s.msee;
    result.mean.msee_ave += s.msee_ave;
    result.mean.disagreement += s.disagreement;
    result.mean.trace_P += s.trace_P;
  }
  const double inv = 1.0 / config.runs;
  result.mean.msee *= inv;
  result.mean.msee_ave *= inv;
  result.mean.disagreement *= inv;
  result.mean.trace_P *= inv;
  return result;
}

}  // namespace gossipkf
