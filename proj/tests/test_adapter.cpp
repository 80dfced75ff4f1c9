#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "argd/adapter.hpp"

#include "helpers.hpp"

using namespace argd;
using test_helpers::matrix_with_spectrum;

TEST_CASE("delta of two checkpoints", "[adapter]") {
  const Matrix w = gaussian_matrix(4, 3, 1);
  CHECK(fro_norm(adapter::delta(w, w)) == 0.0);
  CHECK(adapter::delta(w, Matrix(4, 3)) == w);
  const Matrix other = gaussian_matrix(4, 3, 2);
  CHECK(fro_norm(adapter::delta(w, other)) ==
        Catch::Approx(fro_norm(adapter::delta(other, w))));
  CHECK_THROWS_AS(adapter::delta(w, Matrix(3, 4)), Error);
}

TEST_CASE("numerical rank by relative threshold", "[adapter]") {
  CHECK(adapter::numerical_rank(matrix_with_spectrum(6, 4, {2.0}, 1)) == 1);
  CHECK(adapter::numerical_rank(matrix_with_spectrum(6, 5, {5.0, 3.0, 1e-9}, 2), 1e-6) == 2);
  CHECK(adapter::numerical_rank(Matrix(4, 4)) == 0);
  CHECK(adapter::numerical_rank(matrix_with_spectrum(6, 5, {5.0, 3.0, 1e-9}, 2), 1e-12) == 3);
}

TEST_CASE("factorize attains the optimal residual", "[adapter]") {
  SECTION("exact at the true rank") {
    const Matrix d = matrix_with_spectrum(8, 6, {4.0, 2.0, 1.0}, 3);
    const adapter::AdapterPair pair = adapter::factorize(d, 3);
    CHECK(pair.residual_fnorm <= 1e-8 * fro_norm(d));
    CHECK(test_helpers::max_abs_diff(d, matmul(pair.a, pair.b)) <= 1e-8);
  }
  SECTION("residual equals the dropped singular value") {
    const Matrix d = Matrix::from_rows({{3, 0}, {0, 1}});
    CHECK(adapter::factorize(d, 1).residual_fnorm == Catch::Approx(1.0).margin(1e-10));
  }
  SECTION("residual is monotone in the rank") {
    const Matrix d = matrix_with_spectrum(7, 6, {5, 4, 3, 2, 1}, 4);
    double prev = 1e300;
    for (std::size_t r = 1; r <= 5; ++r) {
      const double res = adapter::factorize(d, r).residual_fnorm;
      CHECK(res <= prev + 1e-12);
      prev = res;
    }
  }
  SECTION("residual squared equals the tail energy on every fixture") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Matrix d = gaussian_matrix(7, 5, 100 + seed);
      const SvdResult dec = svd(d);
      for (std::size_t r = 1; r <= 5; ++r) {
        double tail = 0.0;
        for (std::size_t i = r; i < dec.s.size(); ++i) tail += dec.s[i] * dec.s[i];
        const double res = adapter::factorize(d, r).residual_fnorm;
        CHECK(res * res == Catch::Approx(tail).margin(1e-8 * (tail + 1.0)));
      }
    }
  }
  SECTION("balanced split equalizes factor norms") {
    const Matrix d = matrix_with_spectrum(6, 5, {4, 2, 1}, 5);
    const adapter::AdapterPair pair = adapter::factorize(d, 2);
    CHECK(fro_norm(pair.a) == Catch::Approx(fro_norm(pair.b)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(adapter::factorize(Matrix::identity(3), 4), Error);
  CHECK_THROWS_AS(adapter::factorize(Matrix::identity(3), 0), Error);
}
