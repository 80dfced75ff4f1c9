#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "argd/matrix.hpp"

namespace argd {

/// SplitMix64 mixing step; used to derive independent sub-seeds from a base
/// seed plus an index without correlated streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Standard-normal sampler on top of std::mt19937_64 with a hand-rolled
/// Box-Muller transform. The engine's output sequence is pinned by the
/// standard, and the uniform-to-double and normal transforms are done here
/// rather than via std::*_distribution (whose algorithms are
/// implementation-defined), so streams reproduce across platforms.
class NormalSampler {
public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0,1], u2 in [0,1)
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// rows x cols of i.i.d. N(0,1) draws. Identical (rows, cols, seed) gives a
/// bitwise-identical matrix.
inline Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  NormalSampler sampler(seed);
  for (double& x : m.data()) x = sampler.next();
  m.check_finite();
  return m;
}

}  // namespace argd
