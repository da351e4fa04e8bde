#pragma once

// Randomized pairwise averaging: an awake node i (probability 1/n) averages its
// value with neighbor j (probability P_ij). One round is one sampled pair.

#include <cmath>
#include <limits>

#include "gossipkf/errors.hpp"
#include "gossipkf/linalg.hpp"
#include "gossipkf/model.hpp"
#include "gossipkf/random.hpp"

namespace gossipkf {

struct GossipEvent {
  int round = 0;
  int i = 0;
  int j = 0;
};

/// W_ij = I - (e_i - e_j)(e_i - e_j)' / 2 (zero-based node ids).
inline Matrix pairwise_matrix(int i, int j, int n) {
  if (i < 0 || j < 0 || i >= n || j >= n) throw ValidationError("pair index out of range");
  if (i == j) throw ValidationError("degenerate pair");
  Vector d = Vector::Zero(n);
  d(i) = 1.0;
  d(j) = -1.0;
  return Matrix::Identity(n, n) - 0.5 * d * d.transpose();
}

/// Draws the waking node uniformly, then its partner from row i of P by
/// inverse CDF in index order.
inline GossipEvent sample_event(const GossipPlan& plan, Rng& rng, int round = 0) {
  const int n = plan.size();
  const int i = rng.uniform_index(n);
  const double u = rng.uniform();
  double cumulative = 0.0;
  int chosen = -1;
  for (int j = 0; j < n; ++j) {
    const double p = plan.P(i, j);
    if (p <= 0.0) continue;
    chosen = j;
    cumulative += p;
    if (u < cumulative) break;
  }
  if (chosen < 0) throw ValidationError("gossip plan row " + std::to_string(i + 1) + " is empty");
  return {round, i, chosen};
}

/// Replaces rows i and j of `values` by their average.
inline void apply_round(Matrix& values, const GossipEvent& event) {
  const Eigen::RowVectorXd avg = 0.5 * (values.row(event.i) + values.row(event.j));
  values.row(event.i) = avg;
  values.row(event.j) = avg;
}

inline Matrix apply_round(const Matrix& values, const GossipEvent& event) {
  Matrix out = values;
  apply_round(out, event);
  return out;
}

/// Runs `rounds` sampled events on `values`; a single node has nothing to exchange.
inline void run_gossip(Matrix& values, const GossipPlan& plan, int rounds, Rng& rng) {
  if (plan.size() < 2) return;
  for (int t = 0; t < rounds; ++t) apply_round(values, sample_event(plan, rng, t));
}

/// W = (1/n) sum_ij P_ij W_ij
inline Matrix expected_matrix(const GossipPlan& plan) {
  const int n = plan.size();
  if (n == 1) return Matrix::Identity(1, 1);
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (plan.P(i, j) > 0.0) w += plan.P(i, j) * pairwise_matrix(i, j, n);
  return w / static_cast<double>(n);
}

/// E[W'W] evaluated term by term.
inline Matrix expected_second_moment(const GossipPlan& plan) {
  const int n = plan.size();
  if (n == 1) return Matrix::Identity(1, 1);
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (plan.P(i, j) > 0.0) {
        const Matrix wij = pairwise_matrix(i, j, n);
        w += plan.P(i, j) * wij.transpose() * wij;
      }
  return w / static_cast<double>(n);
}

/// Second-largest eigenvalue of a symmetric matrix (eigenvalues sorted descending).
inline double second_eigenvalue(const Matrix& w) {
  if (!is_symmetric(w, 1e-12)) throw ValidationError("second_eigenvalue: matrix must be symmetric");
  if (w.rows() < 2) throw ValidationError("second_eigenvalue: need at least two nodes");
  Eigen::SelfAdjointEigenSolver<Matrix> es(w, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(w.rows() - 2);
}

/// Rounds needed for relative error below epsilon with probability at least
/// 1 - epsilon: ceil(3 log(1/epsilon) / log(1/lambda2)). A plan with
/// lambda2 <= 0 averages exactly in one round.
inline int averaging_time(double epsilon, double lambda2) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
  if (!(lambda2 < 1.0)) throw NumericalError("gossip plan does not converge (lambda2 >= 1)");
  if (lambda2 <= 0.0) return 1;
  const double k = 3.0 * std::log(1.0 / epsilon) / std::log(1.0 / lambda2);
  return static_cast<int>(std::ceil(k));
}

/// One-round exact expectation E[(W (x) I_b) X (W (x) I_b)'] for an nb x nb matrix X.
///
/// Pairs (i, j) and (j, i) share the same W_ij and are merged. Each term only
/// touches block rows/columns i and j.
inline Matrix expected_congruence(const Matrix& x, const GossipPlan& plan, int block) {
  const int n = plan.size();
  if (x.rows() != static_cast<Eigen::Index>(n) * block || !is_square(x))
    throw ValidationError("expected_congruence: dimension mismatch");
  if (n == 1) return x;
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double weight = (plan.P(i, j) + plan.P(j, i)) / static_cast<double>(n);
      if (weight <= 0.0) continue;
      total += weight;
      Matrix y = x;
      const Matrix rows = 0.5 * (y.middleRows(i * block, block) + y.middleRows(j * block, block));
      y.middleRows(i * block, block) = rows;
      y.middleRows(j * block, block) = rows;
      const Matrix cols = 0.5 * (y.middleCols(i * block, block) + y.middleCols(j * block, block));
      y.middleCols(i * block, block) = cols;
      y.middleCols(j * block, block) = cols;
      out += weight * y;
    }
  // Row sums of P below one would leave probability mass on "no event".
  if (total < 1.0) out += (1.0 - total) * x;
  return out;
}

}  // namespace gossipkf
