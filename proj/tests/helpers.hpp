#pragma once

#include <cstdint>
#include <vector>

#include "argd/linalg.hpp"
#include "argd/matrix.hpp"
#include "argd/rng.hpp"

namespace test_helpers {

/// n x m matrix with exactly the requested singular values, via random
/// orthonormal factors.
inline argd::Matrix matrix_with_spectrum(std::size_t n, std::size_t m,
                                         const std::vector<double>& sigmas,
                                         std::uint64_t seed) {
  const std::size_t k = sigmas.size();
  const argd::Matrix u = argd::qr_orthonormal(argd::gaussian_matrix(n, k, argd::mix_seed(seed, 1)));
  const argd::Matrix v = argd::qr_orthonormal(argd::gaussian_matrix(m, k, argd::mix_seed(seed, 2)));
  argd::Matrix a(n, m);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) a(i, j) += sigmas[r] * u(i, r) * v(j, r);
  a.check_finite();
  return a;
}

inline double max_abs_diff(const argd::Matrix& a, const argd::Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace test_helpers
