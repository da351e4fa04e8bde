#pragma once

// Information-form Kalman filters: centralized, noncooperative decentralized,
// consensus on information pairs (algorithm 1) and gossip on estimates
// (algorithm 2).

#include <concepts>
#include <string>
#include <vector>

#include "gossipkf/errors.hpp"
#include "gossipkf/gossip.hpp"
#include "gossipkf/linalg.hpp"
#include "gossipkf/model.hpp"
#include "gossipkf/random.hpp"

namespace gossipkf {

/// Per-node filter memory. After a step, x_post/P_post hold the estimate at k and
/// x_prior/P_prior the prediction for k+1.
struct FilterState {
  Vector x_prior;
  Matrix P_prior;
  Vector x_post;
  Matrix P_post;
};

using FilterBank = std::vector<FilterState>;

/// Information vector u = C'R^{-1}y and matrix U = C'R^{-1}C of one sensor.
struct InformationPair {
  Vector u;
  Matrix U;
};

/// Neighborhood sums S_i = sum_l C_l'R_l^{-1}C_l and q_i = sum_l C_l'R_l^{-1}y_l.
struct FusedData {
  Matrix S;
  Vector q;
};

/// Zero prior mean with covariance `prior_cov`.
inline FilterState initial_state(const Matrix& prior_cov) {
  const auto m = prior_cov.rows();
  return {Vector::Zero(m), prior_cov, Vector::Zero(m), prior_cov};
}

inline FilterBank initial_bank(int nodes, const Matrix& prior_cov) {
  return FilterBank(static_cast<std::size_t>(nodes), initial_state(prior_cov));
}

/// (P_post)^{-1} = (P_prior)^{-1} + S,  x_post = x_prior + P_post (q - S x_prior).
inline FilterState info_measurement_update(FilterState state, const Matrix& S, const Vector& q) {
  const Matrix prior_info = spd_inverse_or_empty(state.P_prior);
  if (prior_info.size() == 0) throw NumericalError("degenerate prior");
  const Matrix post = spd_inverse_or_empty(prior_info + S);
  if (post.size() == 0) throw NumericalError("degenerate posterior information");
  state.P_post = post;
  state.x_post = state.x_prior + post * (q - S * state.x_prior);
  return state;
}

/// x_prior = A x_post,  P_prior = A P_post A' + Q.
inline FilterState time_update(FilterState state, const StateModel& model) {
  state.x_prior = model.A * state.x_post;
  state.P_prior = symmetrized(model.A * state.P_post * model.A.transpose() + model.Q);
  return state;
}

inline InformationPair information_pair(const SensorModel& sensor, const Vector& y) {
  return {sensor.information_vector(y), sensor.information_matrix()};
}

inline void check_measurement(const std::vector<SensorModel>& sensors,
                              const std::vector<Vector>& measurements, int l) {
  if (l >= static_cast<int>(measurements.size()) || measurements[l].size() == 0)
    throw ValidationError("missing measurement from node " + std::to_string(l + 1));
  if (measurements[l].size() != sensors[l].outputs())
    throw ValidationError("measurement from node " + std::to_string(l + 1) + " has wrong size");
}

/// Sums the information contributions of the incoming neighbors of node i
/// (self included via the self-loop).
inline FusedData neighborhood_fusion(int i, const Topology& topology,
                                     const std::vector<SensorModel>& sensors,
                                     const std::vector<Vector>& measurements) {
  const auto m = sensors.at(i).C.cols();
  FusedData fused{Matrix::Zero(m, m), Vector::Zero(m)};
  for (int l : topology.incoming(i)) {
    check_measurement(sensors, measurements, l);
    fused.S += sensors[l].information_matrix();
    fused.q += sensors[l].information_vector(measurements[l]);
  }
  return fused;
}

/// Fused information matrices S_i for every node.
inline std::vector<Matrix> neighborhood_information(const Topology& topology,
                                                    const std::vector<SensorModel>& sensors) {
  std::vector<Matrix> out;
  for (int i = 0; i < topology.size(); ++i) {
    const auto m = sensors.at(i).C.cols();
    Matrix s = Matrix::Zero(m, m);
    for (int l : topology.incoming(i)) s += sensors[l].information_matrix();
    out.push_back(s);
  }
  return out;
}

/// Each node fuses its neighborhood's measurements, then predicts. No estimates
/// are exchanged.
inline FilterBank decentralized_step(FilterBank bank, const StateModel& model,
                                     const Topology& topology,
                                     const std::vector<SensorModel>& sensors,
                                     const std::vector<Vector>& measurements) {
  for (int i = 0; i < static_cast<int>(bank.size()); ++i) {
    const FusedData fused = neighborhood_fusion(i, topology, sensors, measurements);
    bank[i] = time_update(info_measurement_update(std::move(bank[i]), fused.S, fused.q), model);
  }
  return bank;
}

/// Standard information-form KF fusing every sensor.
inline FilterState centralized_reference_step(FilterState state, const StateModel& model,
                                              const std::vector<SensorModel>& sensors,
                                              const std::vector<Vector>& measurements) {
  const auto m = model.A.rows();
  Matrix S = Matrix::Zero(m, m);
  Vector q = Vector::Zero(m);
  for (int l = 0; l < static_cast<int>(sensors.size()); ++l) {
    check_measurement(sensors, measurements, l);
    S += sensors[l].information_matrix();
    q += sensors[l].information_vector(measurements[l]);
  }
  return time_update(info_measurement_update(std::move(state), S, q), model);
}

struct SteadyCovariances {
  Matrix prior;      // P_i^-
  Matrix posterior;  // P_i
  int iterations = 0;
};

/// Fixed point of P- -> A ((P-)^{-1} + S)^{-1} A' + Q, iterated from Pi0
/// (or the identity when Pi0 is singular).
///
/// The posterior is formed as (I + P- S)^{-1} P-, which needs no inverse of P-.
inline SteadyCovariances steady_state_covariances(const StateModel& model, const Matrix& S,
                                                  double rel_tol = 1e-12,
                                                  int max_iter = 1000000) {
  const auto m = model.A.rows();
  const Matrix I = Matrix::Identity(m, m);
  Matrix prior = is_pd(model.Pi0) ? model.Pi0 : I;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix post = symmetrized((I + prior * S).partialPivLu().solve(prior));
    const Matrix next = symmetrized(model.A * post * model.A.transpose() + model.Q);
    if (!next.allFinite() || next.trace() > 1e12) throw NumericalError("Riccati diverged");
    const double change = (next - prior).norm();
    prior = next;
    if (change <= rel_tol * prior.norm()) {
      const Matrix post_final = symmetrized((I + prior * S).partialPivLu().solve(prior));
      return {prior, post_final, it};
    }
  }
  throw NumericalError("Riccati iteration exceeded " + std::to_string(max_iter) + " iterations");
}

/// Consensus step used by algorithm 1: mutates an n x d matrix whose row i is
/// node i's message.
template <typename F>
concept ConsensusStep = requires(F f, Matrix& values) { f(values); };

/// Replaces every row by the exact across-node mean.
struct ExactAverage {
  void operator()(Matrix& values) const {
    const Eigen::RowVectorXd mean = values.colwise().mean();
    values.rowwise() = mean;
  }
};

/// K sampled pairwise-averaging rounds.
struct RandomizedGossip {
  const GossipPlan* plan;
  int rounds;
  Rng* rng;

  void operator()(Matrix& values) const { run_gossip(values, *plan, rounds, *rng); }
};

/// Algorithm 1 bank with the per-node micro-filter covariance scaled by n:
/// P_{0|-1} = n Pi0 and process noise n Q, so that exact averages of (u, U)
/// reproduce the centralized filter.
inline FilterBank algorithm1_initial_bank(const StateModel& model, int nodes) {
  return initial_bank(nodes, static_cast<double>(nodes) * model.Pi0);
}

/// One measurement interval of algorithm 1. Both u and U travel in one message,
/// so they are averaged with the same events.
template <ConsensusStep Consensus>
FilterBank algorithm1_step(FilterBank bank, const StateModel& model,
                           const std::vector<SensorModel>& sensors,
                           const std::vector<Vector>& measurements, Consensus&& consensus) {
  const int n = static_cast<int>(bank.size());
  const auto m = model.A.rows();
  Matrix messages(n, m + m * m);
  for (int i = 0; i < n; ++i) {
    check_measurement(sensors, measurements, i);
    const InformationPair pair = information_pair(sensors[i], measurements[i]);
    messages.row(i).head(m) = pair.u.transpose();
    messages.row(i).tail(m * m) = pair.U.reshaped().transpose();
  }
  consensus(messages);

  StateModel micro = model;
  micro.Q = static_cast<double>(n) * model.Q;
  for (int i = 0; i < n; ++i) {
    const Vector q = messages.row(i).head(m).transpose();
    const Matrix S = symmetrized(messages.row(i).tail(m * m).reshaped(m, m));
    bank[i] = time_update(info_measurement_update(std::move(bank[i]), S, q), micro);
  }
  return bank;
}

/// Runs algorithm 1 over a measurement stream (stream[k][i] = y_i(k)) with K
/// sampled gossip rounds per interval. Returns the posterior estimates x^i_k.
inline std::vector<std::vector<Vector>> algorithm1_run(
    const StateModel& model, const std::vector<SensorModel>& sensors, const GossipPlan& plan,
    int rounds, const std::vector<std::vector<Vector>>& stream, Rng& rng) {
  if (rounds < 1) throw ValidationError("algorithm 1 needs K >= 1 consensus rounds");
  FilterBank bank = algorithm1_initial_bank(model, static_cast<int>(sensors.size()));
  std::vector<std::vector<Vector>> estimates;
  for (const auto& measurements : stream) {
    bank = algorithm1_step(std::move(bank), model, sensors, measurements,
                           RandomizedGossip{&plan, rounds, &rng});
    std::vector<Vector> row;
    for (const auto& s : bank) row.push_back(s.x_post);
    estimates.push_back(std::move(row));
  }
  return estimates;
}

/// Algorithm 2: fused incremental update to phi_i, K gossip rounds on the
/// stacked phi, then prediction. Covariances follow the decentralized recursion
/// and are never exchanged.
inline FilterBank algorithm2_step(FilterBank bank, const StateModel& model,
                                  const Topology& topology, const GossipPlan& plan, int rounds,
                                  const std::vector<SensorModel>& sensors,
                                  const std::vector<Vector>& measurements, Rng& rng) {
  if (rounds < 0) throw ValidationError("K must be nonnegative");
  const int n = static_cast<int>(bank.size());
  const auto m = model.A.rows();
  for (int i = 0; i < n; ++i) {
    const FusedData fused = neighborhood_fusion(i, topology, sensors, measurements);
    bank[i] = info_measurement_update(std::move(bank[i]), fused.S, fused.q);
  }
  if (rounds > 0 && n > 1) {
    Matrix phi(n, m);
    for (int i = 0; i < n; ++i) phi.row(i) = bank[i].x_post.transpose();
    run_gossip(phi, plan, rounds, rng);
    for (int i = 0; i < n; ++i) bank[i].x_post = phi.row(i).transpose();
  }
  for (auto& state : bank) state = time_update(std::move(state), model);
  return bank;
}

}  // namespace gossipkf
