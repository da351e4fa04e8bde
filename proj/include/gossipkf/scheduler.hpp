#pragma once

// Power-constrained selection of the sensors each node fuses. The steady-state
// cost of a selection is the trace of the fixed point of
//   g(X; Xi) = ([A X A' + Q]^{-1} + sum_j gamma_j Omega_j)^{-1},
// with Omega_j = C_j' R_j^{-1} C_j. Each node's subproblem is solved by exact
// enumeration or by a greedy heuristic.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gossipkf/errors.hpp"
#include "gossipkf/linalg.hpp"
#include "gossipkf/model.hpp"

namespace gossipkf {

struct PowerBudget {
  Matrix c;      // link cost c_ij, c_ii = 0
  Vector delta;  // per-node budget
};

inline void validate(const PowerBudget& budget, int nodes) {
  if (budget.c.rows() != nodes || budget.c.cols() != nodes || budget.delta.size() != nodes)
    throw ValidationError("budget: c must be n x n and delta length n");
  if ((budget.c.array() < 0.0).any() || (budget.delta.array() < 0.0).any())
    throw ValidationError("budget: costs and budgets must be nonnegative");
  for (int i = 0; i < nodes; ++i)
    if (budget.c(i, i) != 0.0)
      throw ValidationError("budget: c(" + std::to_string(i + 1) + "," + std::to_string(i + 1) +
                            ") must be zero");
}

/// Row i of the selection matrix; gamma[i] is always 1.
using GammaRow = std::vector<std::uint8_t>;

inline GammaRow self_only(int i, int nodes) {
  GammaRow row(static_cast<std::size_t>(nodes), 0);
  row[i] = 1;
  return row;
}

inline int link_count(const GammaRow& row) {
  return static_cast<int>(std::count(row.begin(), row.end(), std::uint8_t{1}));
}

/// Xi = diag(gamma_1 I_{p_1}, ..., gamma_n I_{p_n}).
inline Matrix selection_matrix(const GammaRow& row, const std::vector<SensorModel>& sensors) {
  std::vector<Matrix> blocks;
  for (std::size_t j = 0; j < sensors.size(); ++j)
    blocks.push_back(static_cast<double>(row.at(j)) *
                     Matrix::Identity(sensors[j].outputs(), sensors[j].outputs()));
  return block_diagonal(blocks);
}

/// sum_j gamma_j Omega_j, summed in index order.
inline Matrix selected_information(const GammaRow& row, const std::vector<SensorModel>& sensors) {
  const auto m = sensors.front().C.cols();
  Matrix s = Matrix::Zero(m, m);
  for (std::size_t j = 0; j < sensors.size(); ++j)
    if (row.at(j)) s += sensors[j].information_matrix();
  return s;
}

/// h(X) = A X A' + Q
inline Matrix predict_covariance(const Matrix& X, const StateModel& model) {
  return symmetrized(model.A * X * model.A.transpose() + model.Q);
}

/// g(X; Xi) given the selected information S = sum_j gamma_j Omega_j.
inline Matrix g_hat(const Matrix& X, const Matrix& S, const StateModel& model) {
  const Matrix h = predict_covariance(X, model);
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw NumericalError("g_hat: h(X) is singular");
  const auto m = h.rows();
  return symmetrized((Matrix::Identity(m, m) + h * S).partialPivLu().solve(h));
}

inline Matrix g_hat(const Matrix& X, const GammaRow& row, const StateModel& model,
                    const std::vector<SensorModel>& sensors) {
  return g_hat(X, selected_information(row, sensors), model);
}

struct SteadyTrace {
  enum class Status { kConverged, kDiverged, kMaxIterations };
  Status status = Status::kDiverged;
  double trace = std::numeric_limits<double>::infinity();
  Matrix X;
  int iterations = 0;

  bool finite() const { return status == Status::kConverged; }
};

/// Fixed point of g(.; Xi) from X0 = Pi0. Divergence (trace above 1e12) and
/// non-convergence are reported, not thrown; both count as infinite cost.
inline SteadyTrace steady_trace(const Matrix& S, const StateModel& model, double tol = 1e-12,
                                int max_iter = 100000) {
  SteadyTrace out;
  Matrix X = model.Pi0;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix next = g_hat(X, S, model);
    out.iterations = it;
    if (!next.allFinite() || next.trace() > 1e12) {
      out.status = SteadyTrace::Status::kDiverged;
      return out;
    }
    const double change = (next - X).norm();
    X = next;
    if (change <= tol * X.norm()) {
      out.status = SteadyTrace::Status::kConverged;
      out.trace = X.trace();
      out.X = X;
      return out;
    }
  }
  out.status = SteadyTrace::Status::kMaxIterations;
  return out;
}

inline SteadyTrace steady_trace(const GammaRow& row, const StateModel& model,
                                const std::vector<SensorModel>& sensors, double tol = 1e-12,
                                int max_iter = 100000) {
  return steady_trace(selected_information(row, sensors), model, tol, max_iter);
}

/// Power drawn by node i: sum_{j != i} [ c_ij gamma_ij + P_ij c_ij / n ].
inline double power_used(const GammaRow& row, int i, const PowerBudget& budget,
                         const GossipPlan& plan) {
  const int n = static_cast<int>(row.size());
  double used = 0.0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    used += budget.c(i, j) * row[j] + plan.P(i, j) * budget.c(i, j) / n;
  }
  return used;
}

inline bool power_feasible(const GammaRow& row, int i, const PowerBudget& budget,
                           const GossipPlan& plan) {
  return power_used(row, i, budget, plan) <= budget.delta(i) + 1e-12;
}

struct NodeSchedule {
  int node = 0;
  GammaRow gamma;
  double trace = std::numeric_limits<double>::infinity();
  double power = 0.0;
  bool feasible = false;
};

struct ScheduleOptions {
  double tol = 1e-12;
  int max_iter = 100000;
};

namespace detail {

/// Strict order: smaller trace, then fewer links, then lexicographically
/// smaller sorted list of selected nodes.
inline bool better(double trace_a, const GammaRow& a, double trace_b, const GammaRow& b) {
  if (trace_a != trace_b) return trace_a < trace_b;
  const int ca = link_count(a), cb = link_count(b);
  if (ca != cb) return ca < cb;
  std::vector<int> la, lb;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j]) la.push_back(static_cast<int>(j));
    if (b[j]) lb.push_back(static_cast<int>(j));
  }
  return la < lb;
}

inline std::vector<int> clean_candidates(int i, std::vector<int> candidates, int n) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::erase(candidates, i);
  for (int j : candidates)
    if (j < 0 || j >= n) throw ValidationError("candidate node out of range");
  return candidates;
}

}  // namespace detail

/// Enumerates every subset of `candidates` (self always selected), keeps the
/// power-feasible ones and returns the minimum steady-state trace.
inline NodeSchedule solve_exact(int i, const StateModel& model,
                                const std::vector<SensorModel>& sensors,
                                const PowerBudget& budget, const GossipPlan& plan,
                                std::vector<int> candidates, const ScheduleOptions& opts = {}) {
  const int n = static_cast<int>(sensors.size());
  candidates = detail::clean_candidates(i, std::move(candidates), n);
  if (candidates.size() > 20) throw ValidationError("exact enumeration limited to 20 candidates");
  const std::uint32_t subsets = 1u << candidates.size();

  NodeSchedule best;
  best.node = i;
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    GammaRow row = self_only(i, n);
    for (std::size_t b = 0; b < candidates.size(); ++b)
      if (mask & (1u << b)) row[candidates[b]] = 1;
    if (!power_feasible(row, i, budget, plan)) continue;
    const SteadyTrace st = steady_trace(row, model, sensors, opts.tol, opts.max_iter);
    if (!st.finite()) continue;
    if (!best.feasible || detail::better(st.trace, row, best.trace, best.gamma)) {
      best.gamma = row;
      best.trace = st.trace;
      best.feasible = true;
    }
  }
  if (!best.feasible) throw UnschedulableError(i, "no power-feasible selection with finite trace");
  best.power = power_used(best.gamma, i, budget, plan);
  return best;
}

/// Starts from self only and repeatedly adds the feasible link with the largest
/// trace decrease per unit cost. Zero-cost links are taken whenever they do not
/// increase the trace.
inline NodeSchedule solve_greedy(int i, const StateModel& model,
                                 const std::vector<SensorModel>& sensors,
                                 const PowerBudget& budget, const GossipPlan& plan,
                                 std::vector<int> candidates, const ScheduleOptions& opts = {}) {
  const int n = static_cast<int>(sensors.size());
  candidates = detail::clean_candidates(i, std::move(candidates), n);

  NodeSchedule current;
  current.node = i;
  current.gamma = self_only(i, n);
  if (!power_feasible(current.gamma, i, budget, plan))
    throw UnschedulableError(i, "gossip cost alone exceeds the budget");
  const SteadyTrace start = steady_trace(current.gamma, model, sensors, opts.tol, opts.max_iter);
  if (!start.finite()) throw UnschedulableError(i, "self-only selection diverges");
  current.trace = start.trace;
  current.feasible = true;

  while (true) {
    int pick = -1;
    double pick_score = 0.0, pick_decrease = 0.0, pick_trace = 0.0;
    for (int j : candidates) {
      if (current.gamma[j]) continue;
      GammaRow row = current.gamma;
      row[j] = 1;
      if (!power_feasible(row, i, budget, plan)) continue;
      const SteadyTrace st = steady_trace(row, model, sensors, opts.tol, opts.max_iter);
      if (!st.finite()) continue;
      const double decrease = current.trace - st.trace;
      const double cost = budget.c(i, j);
      const bool improving = decrease > 0.0 || (cost == 0.0 && decrease >= 0.0);
      if (!improving) continue;
      const double score =
          cost > 0.0 ? decrease / cost : std::numeric_limits<double>::infinity();
      if (pick < 0 || score > pick_score || (score == pick_score && decrease > pick_decrease)) {
        pick = j;
        pick_score = score;
        pick_decrease = decrease;
        pick_trace = st.trace;
      }
    }
    if (pick < 0) break;
    current.gamma[pick] = 1;
    current.trace = pick_trace;
  }
  current.power = power_used(current.gamma, i, budget, plan);
  return current;
}

struct CertificateCheck {
  double min_eig = 0.0;
  bool valid = false;
};

/// Minimum eigenvalue of the block matrix
///   [ Y              (Y - Z C) A   Y - Z C   Z  ]
///   [ A'(Y - C'Z')   Y             0         0  ]
///   [ Y - C'Z'       0             Q^{-1}    0  ]
///   [ Z'             0             0         Xi ]
/// for the whitened output map C = R^{-1/2} C_i. Positive semi-definiteness
/// certifies that X = Y^{-1} satisfies X >= g(X; Xi).
inline CertificateCheck lmi_certificate_check(const Matrix& Y, const Matrix& Z, const Matrix& Xi,
                                              const StateModel& model, const SensorModel& sensor) {
  const auto m = model.A.rows();
  const auto p = sensor.C.rows();
  if (Y.rows() != m || Y.cols() != m || Z.rows() != m || Z.cols() != p || Xi.rows() != p ||
      Xi.cols() != p)
    throw ValidationError("lmi_certificate_check: dimension mismatch");
  Eigen::LLT<Matrix> q_llt(model.Q);
  if (q_llt.info() != Eigen::Success) throw ValidationError("lmi_certificate_check: Q singular");
  const Matrix q_inv = q_llt.solve(Matrix::Identity(m, m));
  const Matrix C = psd_sqrt(sensor.R).llt().solve(sensor.C);
  const Matrix YZC = Y - Z * C;

  const auto size = 3 * m + p;
  Matrix M = Matrix::Zero(size, size);
  M.block(0, 0, m, m) = Y;
  M.block(0, m, m, m) = YZC * model.A;
  M.block(0, 2 * m, m, m) = YZC;
  M.block(0, 3 * m, m, p) = Z;
  M.block(m, 0, m, m) = model.A.transpose() * YZC.transpose();
  M.block(m, m, m, m) = Y;
  M.block(2 * m, 0, m, m) = YZC.transpose();
  M.block(2 * m, 2 * m, m, m) = q_inv;
  M.block(3 * m, 0, p, m) = Z.transpose();
  M.block(3 * m, 3 * m, p, p) = Xi;

  CertificateCheck r;
  r.min_eig = min_eigenvalue(M);
  r.valid = r.min_eig >= -1e-9;
  return r;
}

/// Certificate (Y, Z) = (X^{-1}, X^{-1} K) built from a fixed point X of g for a
/// single sensor, with K = X C' R^{-1/2} the whitened steady gain.
inline std::pair<Matrix, Matrix> certificate_from_fixed_point(const Matrix& X,
                                                              const SensorModel& sensor) {
  const Matrix Y = X.inverse();
  const Matrix C = psd_sqrt(sensor.R).llt().solve(sensor.C);
  const Matrix K = X * C.transpose();
  return {Y, Y * K};
}

enum class ScheduleMethod { kExact, kGreedy };

inline std::string to_string(ScheduleMethod m) {
  return m == ScheduleMethod::kExact ? "exact" : "greedy";
}

struct ScheduleResult {
  ScheduleMethod method = ScheduleMethod::kExact;
  std::vector<NodeSchedule> nodes;
  double J = 0.0;  // (1/n) sum_i Tr(P_i)
};

/// Solves every node's subproblem over its incoming neighbors and aggregates J.
inline ScheduleResult solve_network(const StateModel& model,
                                    const std::vector<SensorModel>& sensors,
                                    const Topology& topology, const PowerBudget& budget,
                                    const GossipPlan& plan, ScheduleMethod method,
                                    const ScheduleOptions& opts = {}) {
  const int n = topology.size();
  validate(budget, n);
  ScheduleResult result;
  result.method = method;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> candidates = topology.incoming(i);
    NodeSchedule s = method == ScheduleMethod::kExact
                         ? solve_exact(i, model, sensors, budget, plan, candidates, opts)
                         : solve_greedy(i, model, sensors, budget, plan, candidates, opts);
    total += s.trace;
    result.nodes.push_back(std::move(s));
  }
  result.J = total / n;
  return result;
}

}  // namespace gossipkf
