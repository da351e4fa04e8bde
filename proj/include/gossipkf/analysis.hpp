#pragma once

// Stacked estimation-error system of the gossip filter at steady-state gains,
// the expected covariance map T and its fixed point, plus numerical checks of
// the trace and orthogonality results.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gossipkf/errors.hpp"
#include "gossipkf/filters.hpp"
#include "gossipkf/gossip.hpp"
#include "gossipkf/linalg.hpp"
#include "gossipkf/model.hpp"

namespace gossipkf {

/// Error recursion  e_k = W [ A_bar e_{k-1} + B_bar (1 (x) w) - D_bar v ]  with
///   A_bar = P (P-)^{-1} (I (x) A),  B_bar = P (P-)^{-1},  D_bar = P L' C' R^{-1}.
struct SteadyErrorSystem {
  int nodes = 0;
  int dim = 0;
  Matrix P_block;       // diag(P_i)
  Matrix Pminus_block;  // diag(P_i^-)
  Matrix A_bar;
  Matrix B_bar;
  Matrix D_bar;
  Matrix L;        // Gamma (x) I_m
  Matrix C_block;  // diag(C_i)
  Matrix R_block;  // diag(R_i)
  Matrix Q;        // plant process noise (m x m)

  /// B_bar (11' (x) Q) B_bar'
  Matrix process_noise_term() const {
    const Matrix ones = Matrix::Ones(nodes, nodes);
    return B_bar * kron(ones, Q) * B_bar.transpose();
  }

  /// D_bar R D_bar'
  Matrix measurement_noise_term() const { return D_bar * R_block * D_bar.transpose(); }

  Matrix forcing() const { return symmetrized(process_noise_term() + measurement_noise_term()); }
};

/// Assembles the stacked system from per-node steady covariances.
inline SteadyErrorSystem assemble_error_system(const std::vector<Matrix>& posteriors,
                                               const std::vector<Matrix>& priors,
                                               const StateModel& model, const Topology& topology,
                                               const std::vector<SensorModel>& sensors) {
  const int n = topology.size();
  if (static_cast<int>(posteriors.size()) != n || static_cast<int>(priors.size()) != n ||
      static_cast<int>(sensors.size()) != n)
    throw ValidationError("error system: per-node inputs must match the node count");
  SteadyErrorSystem sys;
  sys.nodes = n;
  sys.dim = model.dim();
  sys.Q = model.Q;
  sys.P_block = block_diagonal(posteriors);
  sys.Pminus_block = block_diagonal(priors);

  std::vector<Matrix> gains;  // P_i (P_i^-)^{-1}
  for (int i = 0; i < n; ++i) {
    const Matrix prior_inv = priors[i].fullPivLu().inverse();
    gains.push_back(posteriors[i] * prior_inv);
  }
  sys.B_bar = block_diagonal(gains);
  const Matrix eye_n = Matrix::Identity(n, n);
  sys.A_bar = sys.B_bar * kron(eye_n, model.A);

  sys.L = kron(topology.gamma().cast<double>(), Matrix::Identity(sys.dim, sys.dim));
  std::vector<Matrix> cs, rs, r_inv;
  for (const auto& s : sensors) {
    cs.push_back(s.C);
    rs.push_back(s.R);
    r_inv.push_back(s.R.llt().solve(Matrix::Identity(s.R.rows(), s.R.cols())));
  }
  sys.C_block = block_diagonal(cs);
  sys.R_block = block_diagonal(rs);
  sys.D_bar = sys.P_block * sys.L.transpose() * sys.C_block.transpose() * block_diagonal(r_inv);
  return sys;
}

/// Per-node Riccati limits for the neighborhood information S_i, then assembly.
inline SteadyErrorSystem build_steady_error_system(const StateModel& model,
                                                   const std::vector<SensorModel>& sensors,
                                                   const Topology& topology) {
  std::vector<Matrix> posteriors, priors;
  for (const Matrix& S : neighborhood_information(topology, sensors)) {
    const SteadyCovariances steady = steady_state_covariances(model, S);
    posteriors.push_back(steady.posterior);
    priors.push_back(steady.prior);
  }
  return assemble_error_system(posteriors, priors, model, topology, sensors);
}

/// Covariance recursion without gossip: A_bar X A_bar' + forcing.
inline Matrix decentralized_covariance_map(const Matrix& sigma, const SteadyErrorSystem& sys) {
  return symmetrized(sys.A_bar * sigma * sys.A_bar.transpose() + sys.forcing());
}

/// T(X) = E[ W (A_bar X A_bar' + forcing) W' ] where W is the product of K
/// independent gossip events, evaluated exactly by composing the one-round
/// expectation K times.
inline Matrix covariance_map_T(const Matrix& sigma, const SteadyErrorSystem& sys,
                               const GossipPlan& plan, int rounds) {
  if (rounds < 1) throw ValidationError("covariance map needs K >= 1");
  if (plan.size() != sys.nodes) throw ValidationError("plan size does not match the error system");
  Matrix x = decentralized_covariance_map(sigma, sys);
  for (int t = 0; t < rounds; ++t) x = expected_congruence(x, plan, sys.dim);
  return symmetrized(x);
}

struct FixedPointResult {
  Matrix sigma;
  int iterations = 0;
  double residual = 0.0;           // ||T(sigma) - sigma||_F
  double contraction_ratio = 0.0;  // max ||T(X2)-T(X1)|| / ||X2-X1|| over iterates
};

/// Iterates T from `start` (zero when empty) until
/// ||T(X) - X||_F <= tol (1 + ||X||_F).
inline FixedPointResult fixed_point_covariance(const SteadyErrorSystem& sys, const GossipPlan& plan,
                                               int rounds, double tol, int max_iter,
                                               const Matrix& start = Matrix()) {
  if (!(tol > 0.0)) throw ValidationError("tolerance must be positive");
  const int nm = sys.nodes * sys.dim;
  Matrix x = start.size() == 0 ? Matrix::Zero(nm, nm) : start;
  FixedPointResult result;
  double previous_step = -1.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix next = covariance_map_T(x, sys, plan, rounds);
    if (!next.allFinite()) throw NumericalError("covariance map diverged");
    const double step = (next - x).norm();
    // Ratios of successive steps are T's contraction on the pair of iterates;
    // skip pairs whose difference is at rounding level.
    if (previous_step > 1e-9 * (1.0 + x.norm()))
      result.contraction_ratio = std::max(result.contraction_ratio, step / previous_step);
    previous_step = step;
    x = next;
    if (step <= tol * (1.0 + x.norm())) {
      result.sigma = x;
      result.iterations = it;
      result.residual = step;
      return result;
    }
  }
  throw NumericalError("fixed-point iteration exceeded " + std::to_string(max_iter) +
                       " iterations (last contraction ratio " +
                       std::to_string(result.contraction_ratio) + ")");
}

struct TraceInequality {
  double trace_P = 0.0;
  double trace_WPW = 0.0;
  bool holds = false;
};

/// Tr(W P W') <= Tr(P) for symmetric stochastic W and symmetric positive-definite P.
inline TraceInequality trace_contraction_check(const Matrix& W, const Matrix& P) {
  if (!is_symmetric(W, 1e-12) || W.rows() != P.rows() || !is_square(P))
    throw ValidationError("W must be symmetric and match P");
  if ((W.array() < -1e-14).any() || (W.rowwise().sum().array() - 1.0).abs().maxCoeff() > 1e-12)
    throw ValidationError("W must be stochastic");
  if (!is_pd(P)) throw ValidationError("P must be symmetric positive definite");
  TraceInequality r;
  r.trace_P = P.trace();
  r.trace_WPW = (W * P * W.transpose()).trace();
  r.holds = r.trace_WPW <= r.trace_P + 1e-10;
  return r;
}

struct OrthogonalityResult {
  double deviation = 0.0;  // ||A_bar' A_bar - I||_F
  bool is_orthogonal = false;
};

inline OrthogonalityResult orthogonality_check(const SteadyErrorSystem& sys) {
  const auto nm = sys.A_bar.rows();
  OrthogonalityResult r;
  r.deviation = (sys.A_bar.transpose() * sys.A_bar - Matrix::Identity(nm, nm)).norm();
  r.is_orthogonal = r.deviation <= 1e-8;
  return r;
}

struct TraceComparison {
  int k = 0;
  double gossip_trace = 0.0;         // Tr E[Sigma_k] under T
  double decentralized_trace = 0.0;  // Tr P_k without gossip
};

/// Runs T and the gossip-free recursion side by side from the same start.
inline std::vector<TraceComparison> trace_comparison_series(const SteadyErrorSystem& sys,
                                                            const GossipPlan& plan, int rounds,
                                                            int horizon, const Matrix& start) {
  Matrix gossip = start;
  Matrix decentralized = start;
  std::vector<TraceComparison> series;
  series.push_back({0, gossip.trace(), decentralized.trace()});
  for (int k = 1; k <= horizon; ++k) {
    gossip = covariance_map_T(gossip, sys, plan, rounds);
    decentralized = decentralized_covariance_map(decentralized, sys);
    series.push_back({k, gossip.trace(), decentralized.trace()});
  }
  return series;
}

}  // namespace gossipkf
