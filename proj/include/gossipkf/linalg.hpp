#pragma once

// Small dense linear-algebra helpers shared by every module.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace gossipkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline bool is_square(const Matrix& m) { return m.rows() == m.cols(); }

/// Symmetric up to `tol` relative to the largest entry.
inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
  if (!is_square(m)) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Smallest eigenvalue of the symmetric part of `m`.
inline double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline bool is_psd(const Matrix& m, double tol = 1e-10) {
  return is_symmetric(m, 1e-9) && min_eigenvalue(m) >= -tol;
}

inline bool is_pd(const Matrix& m) {
  if (!is_symmetric(m, 1e-9)) return false;
  Eigen::LLT<Matrix> llt(symmetrized(m));
  return llt.info() == Eigen::Success && min_eigenvalue(m) > 0.0;
}

/// Symmetric square root of a PSD matrix; negative rounding noise is clipped.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

/// Inverse of a symmetric positive-definite matrix, or an empty matrix when the
/// Cholesky factorization fails.
inline Matrix spd_inverse_or_empty(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) return Matrix();
  return symmetrized(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

/// Popov-Belevitch-Hautus test: (A, C) is observable iff [lambda I - A; C] has
/// full column rank at every eigenvalue lambda of A.
inline bool is_observable(const Matrix& A, const Matrix& C, double rel_tol = 1e-7) {
  const Eigen::Index m = A.rows();
  if (m == 0) return true;
  if (C.rows() == 0) return false;
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  Eigen::ComplexEigenSolver<CMatrix> es(A.cast<Complex>(), false);
  const double scale = std::max({1.0, A.norm(), C.norm()});
  for (Eigen::Index k = 0; k < m; ++k) {
    CMatrix pencil(m + C.rows(), m);
    pencil.topRows(m) = es.eigenvalues()(k) * CMatrix::Identity(m, m) - A.cast<Complex>();
    pencil.bottomRows(C.rows()) = C.cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(pencil);
    if (svd.singularValues()(m - 1) <= rel_tol * scale) return false;
  }
  return true;
}

/// (A, B) controllable iff (A', B') observable.
inline bool is_controllable(const Matrix& A, const Matrix& B, double rel_tol = 1e-7) {
  return is_observable(A.transpose(), B.transpose(), rel_tol);
}

}  // namespace gossipkf
