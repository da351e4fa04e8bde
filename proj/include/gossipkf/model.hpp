#pragma once

// Plant, sensors, communication graph and gossip probability plan.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gossipkf/errors.hpp"
#include "gossipkf/linalg.hpp"

namespace gossipkf {

/// Linear time-invariant plant x(k+1) = A x(k) + w(k), w ~ N(0, Q), x(0) ~ N(0, Pi0).
struct StateModel {
  Matrix A;
  Matrix Q;
  Matrix Pi0;

  int dim() const { return static_cast<int>(A.rows()); }
};

/// Sensor i: y_i(k) = C x(k) + v_i(k), v_i ~ N(0, R).
struct SensorModel {
  Matrix C;
  Matrix R;

  int outputs() const { return static_cast<int>(C.rows()); }

  /// C' R^{-1} C
  Matrix information_matrix() const {
    return symmetrized(C.transpose() * R.llt().solve(C));
  }

  /// C' R^{-1} y
  Vector information_vector(const Vector& y) const { return C.transpose() * R.llt().solve(y); }
};

inline void validate(const StateModel& model) {
  const auto m = model.A.rows();
  if (m < 1 || !is_square(model.A)) throw ValidationError("A must be a non-empty square matrix");
  if (model.Q.rows() != m || model.Q.cols() != m) throw ValidationError("Q must be m x m");
  if (model.Pi0.rows() != m || model.Pi0.cols() != m) throw ValidationError("Pi0 must be m x m");
  if (!is_psd(model.Q)) throw ValidationError("Q must be symmetric positive semi-definite");
  if (!is_psd(model.Pi0)) throw ValidationError("Pi0 must be symmetric positive semi-definite");
  if (!is_controllable(model.A, psd_sqrt(model.Q)))
    throw ValidationError("(A, sqrt(Q)) must be controllable");
}

/// `index` is zero-based and only used in messages.
inline void validate(const SensorModel& sensor, const StateModel& model, int index) {
  const std::string who = "sensor " + std::to_string(index + 1) + ": ";
  if (sensor.C.cols() != model.A.rows() || sensor.C.rows() < 1)
    throw ValidationError(who + "C must be p x m with p >= 1");
  if (sensor.R.rows() != sensor.C.rows() || !is_square(sensor.R))
    throw ValidationError(who + "R must be p x p");
  if (!is_pd(sensor.R)) throw ValidationError(who + "R must be symmetric positive definite");
  if (!is_observable(model.A, sensor.C)) throw ValidationError(who + "(A, C) must be observable");
}

/// Directed adjacency: gamma(i, j) = 1 means node j receives data from node i.
class Topology {
 public:
  using Adjacency = Eigen::MatrixXi;

  Topology() = default;

  explicit Topology(Adjacency gamma) : gamma_(std::move(gamma)) {
    if (!is_square_adjacency()) throw ValidationError("adjacency matrix must be square");
    for (Eigen::Index i = 0; i < gamma_.size(); ++i) {
      const int v = gamma_.data()[i];
      if (v != 0 && v != 1) throw ValidationError("adjacency matrix must be binary");
    }
  }

  int size() const { return static_cast<int>(gamma_.rows()); }
  const Adjacency& gamma() const { return gamma_; }
  bool link(int i, int j) const { return gamma_(i, j) != 0; }

  /// N_i = { j : gamma_ji = 1 }, self included when the self-loop is present.
  std::vector<int> incoming(int i) const {
    std::vector<int> out;
    for (int j = 0; j < size(); ++j)
      if (link(j, i)) out.push_back(j);
    return out;
  }

  /// O_i = { j : gamma_ij = 1 }
  std::vector<int> outgoing(int i) const {
    std::vector<int> out;
    for (int j = 0; j < size(); ++j)
      if (link(i, j)) out.push_back(j);
    return out;
  }

  int in_degree(int i) const { return static_cast<int>(incoming(i).size()); }
  int out_degree(int i) const { return static_cast<int>(outgoing(i).size()); }

  bool is_symmetric() const { return gamma_ == gamma_.transpose(); }

  bool operator==(const Topology&) const = default;

 private:
  bool is_square_adjacency() const { return gamma_.rows() == gamma_.cols(); }

  Adjacency gamma_;
};

struct TopologyIssue {
  enum class Severity { kError, kWarning };
  Severity severity;
  std::string message;

  bool is_error() const { return severity == Severity::kError; }
};

/// Diagnostics for the adjacency matrix. Missing self-loops are errors;
/// asymmetric links and isolated nodes are warnings. Node numbers in messages
/// are one-based.
inline std::vector<TopologyIssue> validate_topology(const Topology& topology) {
  std::vector<TopologyIssue> issues;
  const int n = topology.size();
  for (int i = 0; i < n; ++i)
    if (!topology.link(i, i))
      issues.push_back({TopologyIssue::Severity::kError,
                        "missing self-loop at node " + std::to_string(i + 1)});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (topology.link(i, j) != topology.link(j, i))
        issues.push_back({TopologyIssue::Severity::kWarning,
                          "asymmetric link (" + std::to_string(i + 1) + "," +
                              std::to_string(j + 1) + ")"});
  for (int i = 0; i < n; ++i) {
    bool has_neighbor = false;
    for (int j = 0; j < n && !has_neighbor; ++j)
      has_neighbor = j != i && (topology.link(i, j) || topology.link(j, i));
    if (!has_neighbor && n > 1)
      issues.push_back({TopologyIssue::Severity::kWarning,
                        "isolated node " + std::to_string(i + 1)});
  }
  return issues;
}

inline bool has_errors(const std::vector<TopologyIssue>& issues) {
  for (const auto& issue : issues)
    if (issue.is_error()) return true;
  return false;
}

/// Throws the first error-level issue.
inline void require_valid(const Topology& topology) {
  for (const auto& issue : validate_topology(topology))
    if (issue.is_error()) throw ValidationError(issue.message);
}

/// Elementwise OR of the adjacency with its transpose.
inline Topology symmetrize(const Topology& topology) {
  const Topology::Adjacency& g = topology.gamma();
  return Topology(g.cwiseMax(g.transpose()).eval());
}

/// Pair-selection probabilities: an awake node i contacts j with probability P(i, j).
/// Every node wakes with probability 1/n.
struct GossipPlan {
  Matrix P;

  int size() const { return static_cast<int>(P.rows()); }
};

/// Checks stochasticity and that the support lies on undirected links of `topology`.
inline void validate(const GossipPlan& plan, const Topology& topology) {
  const int n = plan.size();
  if (plan.P.cols() != n || topology.size() != n)
    throw ValidationError("gossip plan must be n x n with n matching the topology");
  if (n == 1) return;
  const Topology sym = symmetrize(topology);
  for (int i = 0; i < n; ++i) {
    if (plan.P(i, i) != 0.0)
      throw ValidationError("gossip plan: P(" + std::to_string(i + 1) + "," +
                            std::to_string(i + 1) + ") must be zero");
    for (int j = 0; j < n; ++j) {
      if (plan.P(i, j) < 0.0 || !std::isfinite(plan.P(i, j)))
        throw ValidationError("gossip plan entries must be finite and nonnegative");
      if (plan.P(i, j) > 0.0 && !sym.link(i, j))
        throw ValidationError("gossip plan: P(" + std::to_string(i + 1) + "," +
                              std::to_string(j + 1) + ") > 0 without a link");
    }
    if (std::abs(plan.P.row(i).sum() - 1.0) > 1e-9)
      throw ValidationError("gossip plan: row " + std::to_string(i + 1) + " must sum to 1");
  }
}

/// Uniform contact distribution over the undirected neighbors of each node.
/// A single-node network gets the trivial plan P = [0] (nothing to exchange).
inline GossipPlan build_uniform_gossip_plan(const Topology& topology) {
  const Topology sym = symmetrize(topology);
  const int n = sym.size();
  GossipPlan plan{Matrix::Zero(n, n)};
  if (n == 1) return plan;
  for (int i = 0; i < n; ++i) {
    std::vector<int> neighbors;
    for (int j = 0; j < n; ++j)
      if (j != i && sym.link(i, j)) neighbors.push_back(j);
    if (neighbors.empty())
      throw ValidationError("gossip plan undefined for isolated node " + std::to_string(i + 1));
    for (int j : neighbors) plan.P(i, j) = 1.0 / static_cast<double>(neighbors.size());
  }
  return plan;
}

}  // namespace gossipkf
