// Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
// budget. Exits nonzero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gossipkf/analysis.hpp"
#include "gossipkf/filters.hpp"
#include "gossipkf/gossip.hpp"
#include "gossipkf/report.hpp"
#include "gossipkf/scenario.hpp"
#include "gossipkf/scheduler.hpp"
#include "gossipkf/sim.hpp"
#include "test_support.hpp"

using namespace gossipkf;
namespace gt = gossipkf::testing;

namespace {

const std::string kFiveNodeScenario = std::string(GOSSIPKF_SCENARIO_DIR) + "/example1.scenario";

struct Outcome {
  bool pass = true;
  std::string detail;
};

Outcome fail(const std::string& detail) { return {false, detail}; }
Outcome ok(const std::string& detail = "") { return {true, detail}; }

std::string fmt(double v) { return format_number(v); }

// --- 1 -----------------------------------------------------------------------

Outcome gossip_invariants() {
  Rng rng(101);
  int rounds = 0;
  while (rounds < 10000) {
    const int n = 2 + rng.uniform_index(9);
    const GossipPlan plan = gt::random_plan(gt::random_connected_topology(n, rng), rng);
    Matrix values = gt::random_matrix(n, 3, rng);
    const Eigen::RowVectorXd mean = values.colwise().mean();
    for (int t = 0; t < 100; ++t, ++rounds) {
      const GossipEvent e = sample_event(plan, rng, t);
      apply_round(values, e);
      const double drift = (values.colwise().mean() - mean).cwiseAbs().maxCoeff();
      if (drift > 1e-12) return fail("column mean drift " + fmt(drift));
      const Matrix w = pairwise_matrix(e.i, e.j, n);
      const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
      const double rows = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
      const double cols = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
      const double idem = (w * w - w).cwiseAbs().maxCoeff();
      if (std::max({asym, rows, cols, idem}) > 1e-12) return fail("W_ij invariant violated");
    }
  }
  return ok(std::to_string(rounds) + " rounds");
}

// --- 2 -----------------------------------------------------------------------

Outcome mean_square_bound() {
  const int n = 8, horizon = 50, trajectories = 2000;
  const GossipPlan plan = build_uniform_gossip_plan(gt::ring_topology(n));
  const double lambda2 = second_eigenvalue(expected_matrix(plan));
  Rng rng(202);
  Matrix x0 = gt::random_matrix(n, 1, rng);
  const Matrix e0 = x0.array() - x0.mean();
  const double e0sq = e0.squaredNorm();
  std::vector<double> sum(horizon + 1, 0.0), sumsq(horizon + 1, 0.0);
  for (int r = 0; r < trajectories; ++r) {
    Matrix x = x0;
    for (int k = 0; k <= horizon; ++k) {
      if (k > 0) apply_round(x, sample_event(plan, rng, k));
      const double v = (x.array() - x0.mean()).matrix().squaredNorm();
      sum[k] += v;
      sumsq[k] += v * v;
    }
  }
  double worst = -INFINITY;
  for (int k = 0; k <= horizon; ++k) {
    const double mean = sum[k] / trajectories;
    const double var = std::max(0.0, sumsq[k] / trajectories - mean * mean);
    const double se = std::sqrt(var * trajectories / (trajectories - 1) / trajectories);
    // Rounding slack: at k = 0 every sample equals the bound exactly, but the
    // summed mean can land one ulp above it.
    const double bound = std::pow(lambda2, k) * e0sq * (1.0 + 1e-12);
    worst = std::max(worst, mean - bound - 3 * se);
    if (mean > bound + 3 * se)
      return fail("k=" + std::to_string(k) + " mean " + fmt(mean) + " > bound " + fmt(bound) +
                  " + 3SE " + fmt(3 * se));
  }
  return ok("lambda2=" + fmt(lambda2) + ", max(mean - bound - 3SE)=" + fmt(worst));
}

// --- 3 -----------------------------------------------------------------------

Outcome averaging_time_probability() {
  const double eps = 0.1;
  const GossipPlan plan = build_uniform_gossip_plan(gt::complete_topology(3));
  const double lambda2 = second_eigenvalue(expected_matrix(plan));
  const int k_star = averaging_time(eps, lambda2);
  Rng rng(303);
  const int trials = 5000;
  int failures = 0;
  for (int t = 0; t < trials; ++t) {
    Matrix x = gt::random_matrix(3, 1, rng);
    const double norm0 = x.norm();
    const double mean = x.mean();
    run_gossip(x, plan, k_star, rng);
    if ((x.array() - mean).matrix().norm() / norm0 >= eps) ++failures;
  }
  const double lower = gt::wilson_lower(failures, trials, 2.5758293035489);
  const std::string detail = "K*=" + std::to_string(k_star) + ", failure rate " +
                             fmt(double(failures) / trials) + ", 99% lower bound " + fmt(lower);
  if (k_star != 10) return fail("expected K*=10, " + detail);
  return lower <= eps ? ok(detail) : fail(detail);
}

// --- 4 -----------------------------------------------------------------------

Outcome exact_average_equivalence() {
  const ScenarioConfig config = parse_scenario(kFiveNodeScenario);
  const auto sensors = effective_sensors(config);
  const int n = config.nodes();
  Rng root(404);
  Rng truth_rng = root.split(Stream::kTruth), meas_rng = root.split(Stream::kMeasurement);
  const auto truth = simulate_truth(config.model, 100, truth_rng);
  const auto ys = simulate_measurements(truth, sensors, meas_rng);
  FilterBank bank = algorithm1_initial_bank(config.model, n);
  FilterState central = initial_state(config.model.Pi0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    bank = algorithm1_step(std::move(bank), config.model, sensors, ys[k], ExactAverage{});
    central = centralized_reference_step(std::move(central), config.model, sensors, ys[k]);
    for (const auto& s : bank) worst = std::max(worst, (s.x_post - central.x_post).cwiseAbs().maxCoeff());
  }
  const std::string detail = "max |x_i - x_central| = " + fmt(worst);
  return worst <= 1e-8 ? ok(detail) : fail(detail);
}

// --- 5 -----------------------------------------------------------------------

Outcome golden_ratio() {
  const Matrix one = Matrix::Constant(1, 1, 1.0);
  const StateModel m{one, one, one};
  const SteadyCovariances sc = steady_state_covariances(m, one);
  const double dp = std::abs(sc.prior(0, 0) - (1 + std::sqrt(5.0)) / 2);
  const double dq = std::abs(sc.posterior(0, 0) - 0.6180339887);
  const std::string detail = "prior " + fmt(sc.prior(0, 0)) + ", posterior " + fmt(sc.posterior(0, 0));
  return dp <= 1e-9 && dq <= 1e-9 ? ok(detail) : fail(detail);
}

// --- 6 -----------------------------------------------------------------------

Outcome covariance_fixed_point() {
  const gt::Toy toy = gt::toy_system();
  const int rounds = 2;
  const double tol = 1e-10;
  const SteadyErrorSystem sys = build_steady_error_system(toy.model, toy.sensors, toy.topology);
  const FixedPointResult a = fixed_point_covariance(sys, toy.plan, rounds, tol, 1000000);
  const FixedPointResult b = fixed_point_covariance(sys, toy.plan, rounds, tol, 1000000,
                                                    10.0 * Matrix::Identity(6, 6));
  const double gap = (a.sigma - b.sigma).norm() / (1.0 + a.sigma.norm());
  const double ratio = std::max(a.contraction_ratio, b.contraction_ratio);
  const Matrix mc = gt::monte_carlo_error_covariance(toy.model, toy.sensors, toy.topology, toy.plan,
                                                     rounds, 20000, 200, 606);
  const double rel = std::abs(mc.trace() - a.sigma.trace()) / a.sigma.trace();
  const std::string detail = "start gap " + fmt(gap) + ", contraction " + fmt(ratio) +
                             ", Tr(Sigma*) " + fmt(a.sigma.trace()) + ", Monte-Carlo " +
                             fmt(mc.trace()) + " (" + fmt(100 * rel) + "%)";
  if (gap > 2 * tol) return fail("starts disagree: " + detail);
  if (!(ratio < 1.0)) return fail("no contraction: " + detail);
  return rel <= 0.05 ? ok(detail) : fail(detail);
}

// --- 7 -----------------------------------------------------------------------

Outcome orthogonal_comparison() {
  const SteadyErrorSystem sys = gt::orthogonal_instance();
  if (!orthogonality_check(sys).is_orthogonal) return fail("instance is not orthogonal");
  const GossipPlan plan = build_uniform_gossip_plan(gt::path_topology(3));
  Rng rng(707);
  const auto series = trace_comparison_series(sys, plan, 2, 50, gt::random_spd(6, rng));
  if (series.front().gossip_trace != series.front().decentralized_trace)
    return fail("traces differ at k=0");
  double margin = INFINITY;
  for (const auto& c : series) {
    margin = std::min(margin, c.decentralized_trace - c.gossip_trace);
    if (c.gossip_trace > c.decentralized_trace + 1e-9)
      return fail("k=" + std::to_string(c.k) + ": " + fmt(c.gossip_trace) + " > " +
                  fmt(c.decentralized_trace));
  }
  return ok("final traces " + fmt(series.back().gossip_trace) + " vs " +
            fmt(series.back().decentralized_trace));
}

// --- 8 -----------------------------------------------------------------------

Outcome trace_inequality_sweep() {
  Rng rng(808);
  double worst = -INFINITY;
  for (int t = 0; t < 500; ++t) {
    const int n = 2 + rng.uniform_index(9);
    const GossipPlan plan = gt::random_plan(gt::random_connected_topology(n, rng), rng);
    const TraceInequality r = trace_contraction_check(expected_matrix(plan), gt::random_spd(n, rng, 1e-3));
    worst = std::max(worst, r.trace_WPW - r.trace_P);
    if (!r.holds) return fail("pair " + std::to_string(t) + " violates the inequality");
  }
  return ok("max Tr(WPW') - Tr(P) = " + fmt(worst));
}

// --- 9 -----------------------------------------------------------------------

double tail_mean(const Vector& v, int window) { return v.tail(window).mean(); }

Outcome five_node_reproduction() {
  ScenarioConfig gossip = parse_scenario(kFiveNodeScenario);
  gossip.strategy = Strategy::kAlgorithm2;
  gossip.rounds = 20;
  gossip.auto_rounds = false;
  gossip.runs = 100;
  gossip.horizon = 100;
  ScenarioConfig none = gossip;
  none.strategy = Strategy::kNoConsensus;
  const MetricSeries g = monte_carlo(gossip).mean;
  const MetricSeries d = monte_carlo(none).mean;
  const int window = 20;
  const int h = gossip.horizon;

  // (a) flat per-node covariance traces.
  double max_change = 0.0;
  for (int i = 0; i < gossip.nodes(); ++i)
    for (int k = h - window; k < h; ++k)
      max_change = std::max(max_change, std::abs(g.trace_P(k, i) - g.trace_P(k - 1, i)) / g.trace_P(k - 1, i));
  // (b), (c) steady-state comparison with the no-consensus filter.
  const double msee_g = tail_mean(g.msee_ave, window), msee_d = tail_mean(d.msee_ave, window);
  const double dis_g = tail_mean(g.disagreement, window), dis_d = tail_mean(d.disagreement, window);

  // (d) K sweep: median over three seeds of the steady disagreement.
  std::vector<int> ks;
  for (int k = 1; k <= 41; k += 5) ks.push_back(k);
  std::vector<double> med(ks.size()), med_se(ks.size());
  for (std::size_t q = 0; q < ks.size(); ++q) {
    std::vector<std::pair<double, double>> per_seed;  // mean, standard error
    for (std::uint64_t seed : {1ULL, 1001ULL, 2001ULL}) {
      ScenarioConfig c = gossip;
      c.base_seed = seed;
      c.rounds = ks[q];
      std::vector<double> samples;
      for (int r = 0; r < c.runs; ++r)
        samples.push_back(tail_mean(run_experiment(c, seed + r).disagreement, window));
      double mean = 0.0, sq = 0.0;
      for (double s : samples) mean += s / samples.size();
      for (double s : samples) sq += (s - mean) * (s - mean);
      per_seed.emplace_back(mean, std::sqrt(sq / (samples.size() - 1) / samples.size()));
    }
    std::sort(per_seed.begin(), per_seed.end());
    med[q] = per_seed[1].first;
    med_se[q] = per_seed[1].second;
  }
  std::string sweep;
  bool monotone = true;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    sweep += (q ? " " : "") + std::to_string(ks[q]) + ":" + fmt(med[q]);
    if (q > 0 && med[q] > med[q - 1] + 3 * std::hypot(med_se[q], med_se[q - 1])) monotone = false;
  }

  const std::string detail = "(a) max rel change " + fmt(max_change) + "; (b) MSEE " + fmt(msee_g) +
                             " vs " + fmt(msee_d) + "; (c) disagreement " + fmt(dis_g) + " vs " +
                             fmt(dis_d) + "; (d) " + sweep;
  if (!(max_change < 0.01)) return fail("(a) " + detail);
  if (!(msee_g < msee_d)) return fail("(b) " + detail);
  if (!(dis_g < dis_d)) return fail("(c) " + detail);
  if (!monotone) return fail("(d) " + detail);
  return ok(detail);
}

// --- 10 ----------------------------------------------------------------------

Outcome scheduler_sweep() {
  Rng rng(1010);
  int instances = 0;
  double worst_monotone = -INFINITY;
  for (; instances < 200; ++instances) {
    const int n = 2 + rng.uniform_index(5);
    const Topology t = gt::random_connected_topology(n, rng, 0.5);
    const GossipPlan plan = gt::random_plan(t, rng);
    // Random dynamics with spectral radius in [0.5, 1.05].
    Matrix a = gt::random_matrix(2, 2, rng);
    const double rho = a.eigenvalues().cwiseAbs().maxCoeff();
    a *= (0.5 + 0.55 * rng.uniform()) / rho;
    const StateModel model{a, gt::random_spd(2, rng, 0.05) * 0.2, Matrix::Identity(2, 2)};
    std::vector<SensorModel> sensors;
    for (int i = 0; i < n; ++i) sensors.push_back({gt::random_matrix(2, 2, rng), gt::random_spd(2, rng)});
    PowerBudget budget{Matrix::Zero(n, n), Vector(n)};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) budget.c(i, j) = 0.2 + rng.uniform();
    for (int i = 0; i < n; ++i) {
      const double gossip_cost = power_used(self_only(i, n), i, budget, plan);
      budget.delta(i) = gossip_cost + rng.uniform() * budget.c.row(i).sum();
    }

    const ScheduleResult exact = solve_network(model, sensors, t, budget, plan, ScheduleMethod::kExact);
    const ScheduleResult greedy = solve_network(model, sensors, t, budget, plan, ScheduleMethod::kGreedy);
    if (!(exact.J <= greedy.J))
      return fail("instance " + std::to_string(instances) + ": J_exact " + fmt(exact.J) + " > J_greedy " + fmt(greedy.J));
    for (const auto* r : {&exact, &greedy})
      for (const auto& s : r->nodes)
        if (!power_feasible(s.gamma, s.node, budget, plan))
          return fail("infeasible selection at node " + std::to_string(s.node + 1));

    // Monotonicity: adding a link never increases the steady trace.
    for (int i = 0; i < n; ++i) {
      GammaRow row = self_only(i, n);
      double trace = steady_trace(row, model, sensors).trace;
      for (int j : t.incoming(i)) {
        if (j == i || rng.uniform() < 0.3) continue;
        row[j] = 1;
        const double next = steady_trace(row, model, sensors).trace;
        worst_monotone = std::max(worst_monotone, next - trace);
        if (next > trace + 1e-9) return fail("trace increased after adding a link");
        trace = next;
      }
    }
  }

  const Matrix one = Matrix::Constant(1, 1, 1.0);
  const StateModel scalar{one, one, one};
  const SensorModel sensor{one, one};
  const SteadyTrace st = steady_trace(one, scalar);
  const auto [Y, Z] = certificate_from_fixed_point(st.X, sensor);
  const CertificateCheck cert = lmi_certificate_check(Y, Z, one, scalar, sensor);
  const std::string detail = std::to_string(instances) + " instances, max trace increase " +
                             fmt(worst_monotone) + ", certificate min eigenvalue " + fmt(cert.min_eig);
  return cert.valid ? ok(detail) : fail(detail);
}

// --- 11 ----------------------------------------------------------------------

Outcome cli_determinism() {
  const auto base = std::filesystem::temp_directory_path() / "gossipkf_acceptance";
  std::string csv[2];
  for (int t = 0; t < 2; ++t) {
    const std::string out = (base / ("run" + std::to_string(t))).string();
    std::filesystem::remove_all(out);
    const std::string cmd = std::string(GOSSIPKF_CLI) + " run --config " + kFiveNodeScenario +
                            " --seed 42 --out " + out + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return fail("cli run failed");
    csv[t] = read_file(out + "/metrics.csv");
  }
  const std::string detail = std::to_string(csv[0].size()) + " bytes, fnv1a64 " + hex64(fnv1a64(csv[0]));
  return csv[0] == csv[1] && !csv[0].empty() ? ok(detail) : fail("outputs differ: " + detail);
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> check;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gossip invariants", 5, gossip_invariants},
      {2, "mean-square contraction bound", 10, mean_square_bound},
      {3, "averaging-time probability", 10, averaging_time_probability},
      {4, "exact-average equivalence with the centralized filter", 1, exact_average_equivalence},
      {5, "scalar Riccati fixed point", 0.1, golden_ratio},
      {6, "error-covariance fixed point", 60, covariance_fixed_point},
      {7, "gossip never worse on the orthogonal instance", 5, orthogonal_comparison},
      {8, "trace inequality sweep", 2, trace_inequality_sweep},
      {9, "example network reproduction", 120, five_node_reproduction},
      {10, "scheduler sweep and certificate", 30, scheduler_sweep},
      {11, "CLI determinism", 60, cli_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = fail(std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.pass && seconds > c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    failures += !outcome.pass;
    std::printf("%s criterion %d: %s (%.3f s) %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                seconds, outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
