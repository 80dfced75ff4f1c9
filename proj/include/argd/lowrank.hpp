#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "argd/linalg.hpp"
#include "argd/matrix.hpp"
#include "argd/rng.hpp"

namespace argd::lowrank {

/// Randomized range finder: orthonormal Q approximating the leading
/// r-dimensional column space of a, from a single Gaussian sketch
/// Q = qr(a * Omega). When a's numerical rank is below r the sketch is
/// retried once with seed+1 and, failing that, the achievable narrower
/// basis is returned with rank_deficient set (a legitimately low-rank
/// input is a state, not a failure).
struct SsrfResult {
  Matrix q;
  bool rank_deficient = false;
};

/// oversample adds extra sketch columns and truncates back to r through an
/// SVD of the sketched projection; 0 gives the plain single-pass range
/// finder, whose residual tail is too heavy to be reliable (a zero
/// oversampling draw misses the leading subspace by >3x the optimal
/// residual in roughly a third of trials on decaying spectra).
inline SsrfResult ssrf(const Matrix& a, std::size_t r, std::uint64_t seed,
                       std::size_t oversample = 2) {
  detail::require_nonempty(a, "ssrf");
  if (r < 1 || r > std::min(a.rows(), a.cols())) {
    throw Error(ErrorCode::invalid_argument,
                "ssrf: rank " + std::to_string(r) + " outside [1, min(n,m)]");
  }
  if (fro_norm(a) == 0.0) {
    throw Error(ErrorCode::invalid_argument, "ssrf: zero matrix has no range");
  }
  const std::size_t width = std::min(r + oversample, std::min(a.rows(), a.cols()));
  SsrfResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const Matrix omega = gaussian_matrix(a.cols(), width, seed + static_cast<std::uint64_t>(attempt));
    const Matrix sketch = matmul(a, omega);
    try {
      result.q = qr_orthonormal(sketch);
      break;
    } catch (const RankDeficientError&) {
      if (attempt == 1) {
        result.q = orthonormal_range(sketch);
        result.rank_deficient = true;
      }
    }
  }
  if (oversample > 0 && result.q.cols() > r) {
    // Truncate the widened basis to its r leading directions.
    const SvdResult proj = svd(matmul(transpose(result.q), a));
    result.q = matmul(result.q, prefix_cols(proj.u, r));
  }
  return result;
}

/// Fraction of a's energy lost by projecting onto span(q), with squared
/// Frobenius norms: ||a - q q^T a||_F^2 / ||a||_F^2. Requires orthonormal q.
inline double approx_error_ratio(const Matrix& a, const Matrix& q) {
  detail::require_nonempty(a, "approx_error_ratio");
  detail::require_nonempty(q, "approx_error_ratio");
  if (q.rows() != a.rows()) {
    throw Error(ErrorCode::invalid_argument, "approx_error_ratio: basis row count mismatch");
  }
  const double total = fro_norm(a);
  if (total == 0.0) {
    throw Error(ErrorCode::invalid_argument,
                "approx_error_ratio: ratio undefined for the zero matrix");
  }
  const Matrix gram = matmul(transpose(q), q);
  const double ortho_defect = fro_norm(sub(gram, Matrix::identity(q.cols())));
  if (ortho_defect > 1e-8 * static_cast<double>(std::max<std::size_t>(q.cols(), 1))) {
    throw Error(ErrorCode::invalid_argument,
                "approx_error_ratio: basis not orthonormal, defect " +
                    std::to_string(ortho_defect));
  }
  const Matrix residual = sub(a, matmul(q, matmul(transpose(q), a)));
  const double r = fro_norm(residual);
  const double ratio = (r * r) / (total * total);
  return std::clamp(ratio, 0.0, 1.0);
}

enum class SubspaceMode { ssrf, exact_svd };

struct RankSearchResult {
  Matrix basis;              // n x rank, orthonormal columns
  std::size_t rank = 0;      // smallest rank found satisfying the threshold
  double error_ratio = 0.0;  // achieved energy-loss fraction at that rank
  std::size_t evaluations = 0;
  bool rank_deficient = false;  // input rank fell short of the requested bounds
};

/// Information-threshold rank search: smallest r in [r_min, r_max] whose
/// r-column prefix of a single basis (randomized range finder or exact left
/// singular vectors, computed once at width r_max) loses at most eta_th of
/// a's energy. Binary search over prefix widths; at most
/// ceil(log2(r_max - r_min + 1)) + 1 ratio evaluations. If no rank in range
/// meets the threshold, returns r_max with the achieved ratio.
///
/// Randomized prefixes are not guaranteed monotone in width; linear_scan
/// trades the log bound for an exact minimal rank in that mode.
inline RankSearchResult iass(const Matrix& a, std::size_t r_min, std::size_t r_max,
                             double eta_th, std::uint64_t seed, SubspaceMode mode,
                             bool linear_scan = false) {
  detail::require_nonempty(a, "iass");
  const std::size_t limit = std::min(a.rows(), a.cols());
  if (r_min < 1 || r_min > r_max || r_max > limit) {
    throw Error(ErrorCode::invalid_argument,
                "iass: need 1 <= r_min <= r_max <= min(n,m), got [" +
                    std::to_string(r_min) + ", " + std::to_string(r_max) + "] vs " +
                    std::to_string(limit));
  }
  if (!(eta_th > 0.0 && eta_th < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "iass: eta_th must lie in (0,1)");
  }
  if (fro_norm(a) == 0.0) {
    throw Error(ErrorCode::invalid_argument, "iass: zero matrix");
  }

  RankSearchResult result;
  Matrix basis;  // width >= searched range (up to deficiency)
  if (mode == SubspaceMode::ssrf) {
    SsrfResult sketch = ssrf(a, r_max, seed);
    basis = std::move(sketch.q);
    result.rank_deficient = sketch.rank_deficient;
  } else {
    basis = prefix_cols(svd(a).u, r_max);
  }

  const std::size_t hi_limit = std::min(r_max, basis.cols());
  const std::size_t lo_limit = std::min(r_min, hi_limit);
  if (hi_limit < r_min) result.rank_deficient = true;

  std::map<std::size_t, double> cache;
  auto ratio_at = [&](std::size_t r) {
    auto it = cache.find(r);
    if (it != cache.end()) return it->second;
    const double value = approx_error_ratio(a, prefix_cols(basis, r));
    ++result.evaluations;
    cache.emplace(r, value);
    return value;
  };

  std::size_t chosen = hi_limit;
  if (linear_scan) {
    for (std::size_t r = lo_limit; r <= hi_limit; ++r) {
      chosen = r;
      if (ratio_at(r) <= eta_th) break;
    }
  } else {
    std::size_t lo = lo_limit, hi = hi_limit;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (ratio_at(mid) <= eta_th) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    chosen = lo;
  }

  result.rank = chosen;
  result.error_ratio = ratio_at(chosen);
  result.basis = prefix_cols(basis, chosen);
  return result;
}

/// Energy fraction outside the best rank-one approximation:
/// 1 - sigma_1^2 / sum_i sigma_i^2.
inline double kappa(const Matrix& g) {
  detail::require_nonempty(g, "kappa");
  if (fro_norm(g) == 0.0) {
    throw Error(ErrorCode::invalid_argument, "kappa: undefined for the zero matrix");
  }
  const SvdResult dec = svd(g);
  double total = 0.0;
  for (double s : dec.s) total += s * s;
  const double top = dec.s.front() * dec.s.front();
  return std::clamp(1.0 - top / total, 0.0, 1.0);
}

/// ||g||_F / ||g||_2, the unsquared norm ratio. Always >= 1 and scale
/// invariant.
inline double stable_rank(const Matrix& g) {
  detail::require_nonempty(g, "stable_rank");
  const double f = fro_norm(g);
  if (f == 0.0) {
    throw Error(ErrorCode::invalid_argument, "stable_rank: undefined for the zero matrix");
  }
  return f / spectral_norm(g);
}

/// Smallest r >= 1 whose singular-value tail energy is at most
/// eta_th * ||g||_F^2, from the exact SVD.
inline std::size_t effective_rank(const Matrix& g, double eta_th) {
  detail::require_nonempty(g, "effective_rank");
  if (!(eta_th > 0.0 && eta_th < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "effective_rank: eta_th must lie in (0,1)");
  }
  if (fro_norm(g) == 0.0) {
    throw Error(ErrorCode::invalid_argument, "effective_rank: undefined for the zero matrix");
  }
  const SvdResult dec = svd(g);
  const std::size_t k = dec.s.size();
  // Tail sums accumulated from the back for accuracy.
  std::vector<double> tail(k + 1, 0.0);
  for (std::size_t i = k; i-- > 0;) tail[i] = tail[i + 1] + dec.s[i] * dec.s[i];
  const double budget = eta_th * tail[0];
  for (std::size_t r = 1; r <= k; ++r) {
    if (tail[r] <= budget) return r;
  }
  return k;
}

}  // namespace argd::lowrank
