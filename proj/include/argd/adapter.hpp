#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "argd/linalg.hpp"
#include "argd/matrix.hpp"

namespace argd::adapter {

/// Weight gap between a fine-tuned and a pretrained checkpoint.
inline Matrix delta(const Matrix& w_ft, const Matrix& w_pre) {
  detail::require_same_shape(w_ft, w_pre, "delta");
  return sub(w_ft, w_pre);
}

/// Number of singular values above rel_tol * sigma_1; 0 for the zero matrix.
inline std::size_t numerical_rank(const Matrix& d, double rel_tol = 1e-6) {
  detail::require_nonempty(d, "numerical_rank");
  if (fro_norm(d) == 0.0) return 0;
  const SvdResult dec = svd(d);
  const double threshold = rel_tol * dec.s.front();
  std::size_t rank = 0;
  for (double s : dec.s) {
    if (s > threshold) ++rank;
  }
  return rank;
}

/// Balanced rank-r factorization d ~= a * b from the truncated SVD:
/// a = U_r sqrt(S_r), b = sqrt(S_r) V_r^T, the Frobenius-optimal rank-r
/// approximation. The square-root split gives ||a||_F = ||b||_F.
struct AdapterPair {
  Matrix a;  // n x r
  Matrix b;  // r x m
  std::size_t rank = 0;
  double residual_fnorm = 0.0;  // ||d - a*b||_F, recomputed from the factors
};

inline AdapterPair factorize(const Matrix& d, std::size_t r) {
  detail::require_nonempty(d, "factorize");
  if (r < 1 || r > std::min(d.rows(), d.cols())) {
    throw Error(ErrorCode::invalid_argument,
                "factorize: rank " + std::to_string(r) + " outside [1, min(n,m)]");
  }
  const SvdResult dec = svd(d);
  AdapterPair pair;
  pair.rank = r;
  pair.a = Matrix(d.rows(), r);
  pair.b = Matrix(r, d.cols());
  for (std::size_t k = 0; k < r; ++k) {
    const double root = std::sqrt(dec.s[k]);
    for (std::size_t i = 0; i < d.rows(); ++i) pair.a(i, k) = dec.u(i, k) * root;
    for (std::size_t j = 0; j < d.cols(); ++j) pair.b(k, j) = root * dec.v(j, k);
  }
  pair.residual_fnorm = fro_norm(sub(d, matmul(pair.a, pair.b)));
  return pair;
}

}  // namespace argd::adapter
