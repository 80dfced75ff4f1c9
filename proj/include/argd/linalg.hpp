#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "argd/error.hpp"
#include "argd/matrix.hpp"

namespace argd {

namespace detail {

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
  Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j)
      m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = e(i, j);
  m.check_finite();
  return m;
}

}  // namespace detail

/// Thin SVD a = u * diag(s) * v^T with k = min(rows, cols) columns.
/// Singular values are nonincreasing; each left singular vector is
/// sign-normalized so its largest-magnitude entry is positive, which makes
/// the decomposition deterministic.
struct SvdResult {
  Matrix u;               // n x k, orthonormal columns
  std::vector<double> s;  // length k, nonincreasing, >= 0
  Matrix v;               // m x k, orthonormal columns
};

inline SvdResult svd(const Matrix& a) {
  detail::require_nonempty(a, "svd");
  const Eigen::MatrixXd e = detail::to_eigen(a);
  Eigen::MatrixXd u, v;
  Eigen::VectorXd s;
  // Jacobi gives the best accuracy on small problems; switch to
  // bidiagonalization past the size where its cost starts to bite.
  if (std::min(a.rows(), a.cols()) <= 64) {
    Eigen::JacobiSVD<Eigen::MatrixXd> dec(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) {
      throw Error(ErrorCode::numeric, "svd: iteration failed to converge");
    }
    u = dec.matrixU();
    v = dec.matrixV();
    s = dec.singularValues();
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> dec(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success) {
      throw Error(ErrorCode::numeric, "svd: iteration failed to converge");
    }
    u = dec.matrixU();
    v = dec.matrixV();
    s = dec.singularValues();
  }
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) {
      u.col(j) = -u.col(j);
      v.col(j) = -v.col(j);
    }
  }
  SvdResult result;
  result.u = detail::from_eigen(u);
  result.v = detail::from_eigen(v);
  result.s.assign(s.data(), s.data() + s.size());
  return result;
}

/// Thin QR orthonormal factor of a full-column-rank n x k input (k <= n).
/// Throws RankDeficientError (naming the offending column) when the
/// smallest column pivot falls below 1e-12 * ||a||_F.
inline Matrix qr_orthonormal(const Matrix& a) {
  detail::require_nonempty(a, "qr_orthonormal");
  if (a.cols() > a.rows()) {
    throw Error(ErrorCode::invalid_argument,
                "qr_orthonormal: need cols <= rows, got " + std::to_string(a.rows()) +
                    "x" + std::to_string(a.cols()));
  }
  const Eigen::MatrixXd e = detail::to_eigen(a);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e);
  const Eigen::Index k = e.cols();
  const double threshold = 1e-12 * fro_norm(a);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(qr.matrixR()(i, i)) <= threshold) {
      const std::size_t column = static_cast<std::size_t>(qr.colsPermutation().indices()(i));
      throw RankDeficientError(
          column, "qr_orthonormal: numerically rank-deficient input, column " +
                      std::to_string(column));
    }
  }
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(e.rows(), k);
  return detail::from_eigen(q);
}

/// Orthonormal basis for the numerical column range of a: the leading
/// rank(a) columns of the pivoted-QR Q factor, with rank decided by
/// |R(i,i)| > rel_tol * ||a||_F. Never throws on deficiency; returns the
/// achievable width (possibly < cols).
inline Matrix orthonormal_range(const Matrix& a, double rel_tol = 1e-12) {
  detail::require_nonempty(a, "orthonormal_range");
  const Eigen::MatrixXd e = detail::to_eigen(a);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e);
  const Eigen::Index kmax = std::min(e.rows(), e.cols());
  const double threshold = rel_tol * fro_norm(a);
  Eigen::Index rank = 0;
  while (rank < kmax && std::abs(qr.matrixR()(rank, rank)) > threshold) ++rank;
  if (rank == 0) {
    throw Error(ErrorCode::invalid_argument, "orthonormal_range: zero matrix has no range");
  }
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(e.rows(), rank);
  return detail::from_eigen(q);
}

/// All eigenvalues of a symmetric matrix, ascending, accurate to
/// 1e-8 * ||s||_2. Requires ||S - S^T||_F <= 1e-10 * ||S||_F.
inline std::vector<double> sym_eigvals(const Matrix& s) {
  detail::require_nonempty(s, "sym_eigvals");
  if (s.rows() != s.cols()) {
    throw Error(ErrorCode::invalid_argument, "sym_eigvals: matrix not square");
  }
  const double asym = fro_norm(sub(s, transpose(s)));
  if (asym > 1e-10 * fro_norm(s)) {
    throw Error(ErrorCode::invalid_argument,
                "sym_eigvals: input not symmetric, ||S - S^T||_F = " + std::to_string(asym));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(detail::to_eigen(s),
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::numeric, "sym_eigvals: eigensolver failed to converge");
  }
  const Eigen::VectorXd& vals = solver.eigenvalues();
  return std::vector<double>(vals.data(), vals.data() + vals.size());
}

/// Full symmetric eigendecomposition (ascending values + orthonormal
/// eigenvector columns). Same preconditions as sym_eigvals.
struct SymEig {
  std::vector<double> values;
  Matrix vectors;  // column j pairs with values[j]
};

inline SymEig sym_eig(const Matrix& s) {
  detail::require_nonempty(s, "sym_eig");
  if (s.rows() != s.cols()) {
    throw Error(ErrorCode::invalid_argument, "sym_eig: matrix not square");
  }
  const double asym = fro_norm(sub(s, transpose(s)));
  if (asym > 1e-10 * fro_norm(s)) {
    throw Error(ErrorCode::invalid_argument,
                "sym_eig: input not symmetric, ||S - S^T||_F = " + std::to_string(asym));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(detail::to_eigen(s));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::numeric, "sym_eig: eigensolver failed to converge");
  }
  SymEig result;
  const Eigen::VectorXd& vals = solver.eigenvalues();
  result.values.assign(vals.data(), vals.data() + vals.size());
  result.vectors = detail::from_eigen(solver.eigenvectors());
  return result;
}

/// Largest singular value.
inline double spectral_norm(const Matrix& a) {
  const SvdResult dec = svd(a);
  return dec.s.empty() ? 0.0 : dec.s.front();
}

}  // namespace argd
