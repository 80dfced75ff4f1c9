#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "argd/error.hpp"

namespace argd {

/// Dense real matrix, row-major, double precision. Immutable by
/// convention: operations return fresh values. Every constructor and every
/// operation validates that all entries are finite.
class Matrix {
public:
  /// Empty sentinel (0x0). Used for "not yet initialized" slots; sized
  /// operations reject it.
  Matrix() = default;

  /// rows x cols of zeros.
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(checked_size(rows, cols), 0.0) {
    require_positive_dims();
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_positive_dims();
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorCode::invalid_argument,
                  "matrix data length " + std::to_string(data_.size()) +
                      " does not equal rows*cols = " +
                      std::to_string(rows_ * cols_));
    }
    check_finite();
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) {
        throw Error(ErrorCode::invalid_argument, "ragged initializer rows");
      }
      data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.data_[i * n + i] = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  /// Rebuilds the finiteness invariant after in-place mutation through
  /// data(); every factory below calls it before returning.
  void check_finite() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw Error(ErrorCode::numeric,
                    "nonfinite matrix entry at flat index " + std::to_string(i));
      }
    }
  }

  bool operator==(const Matrix& other) const = default;

private:
  static std::size_t checked_size(std::size_t rows, std::size_t cols) {
    if (rows != 0 && cols > std::numeric_limits<std::size_t>::max() / rows) {
      throw Error(ErrorCode::invalid_argument, "matrix size overflows addressable range");
    }
    return rows * cols;
  }

  void require_positive_dims() const {
    if (rows_ == 0 || cols_ == 0) {
      throw Error(ErrorCode::invalid_argument, "matrix dimensions must be >= 1");
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {
inline void require_nonempty(const Matrix& m, const char* what) {
  if (m.empty()) {
    throw Error(ErrorCode::invalid_argument, std::string(what) + ": empty matrix");
  }
}
inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::invalid_argument,
                std::string(what) + ": shape mismatch " + std::to_string(a.rows()) +
                    "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                    "x" + std::to_string(b.cols()));
  }
}
}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  detail::require_nonempty(a, "matmul");
  detail::require_nonempty(b, "matmul");
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::invalid_argument,
                "matmul: inner dimensions differ, " + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()));
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) {
        c(i, j) += aip * b(p, j);
      }
    }
  }
  c.check_finite();
  return c;
}

inline Matrix transpose(const Matrix& a) {
  detail::require_nonempty(a, "transpose");
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "add");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  c.check_finite();
  return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "sub");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  c.check_finite();
  return c;
}

inline Matrix scale(const Matrix& a, double factor) {
  detail::require_nonempty(a, "scale");
  Matrix c = a;
  for (double& x : c.data()) x *= factor;
  c.check_finite();
  return c;
}

/// Entrywise square.
inline Matrix elem_square(const Matrix& a) {
  detail::require_nonempty(a, "elem_square");
  Matrix c = a;
  for (double& x : c.data()) x *= x;
  c.check_finite();
  return c;
}

/// Entrywise max(x, floor).
inline Matrix elem_max(const Matrix& a, double floor) {
  detail::require_nonempty(a, "elem_max");
  Matrix c = a;
  for (double& x : c.data()) x = std::max(x, floor);
  return c;
}

inline double fro_norm(const Matrix& a) {
  double sum = 0.0;
  for (double x : a.data()) sum += x * x;
  return std::sqrt(sum);
}

inline Matrix operator+(const Matrix& a, const Matrix& b) { return add(a, b); }
inline Matrix operator-(const Matrix& a, const Matrix& b) { return sub(a, b); }
inline Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }
inline Matrix operator*(double s, const Matrix& a) { return scale(a, s); }

/// Kronecker product: (a kron b)[i*r+k, j*s+l] = a[i,j] * b[k,l].
inline Matrix kron(const Matrix& a, const Matrix& b) {
  detail::require_nonempty(a, "kron");
  detail::require_nonempty(b, "kron");
  const std::size_t max_dim = std::size_t(1) << 26;
  if (a.rows() > max_dim / b.rows() || a.cols() > max_dim / b.cols()) {
    throw Error(ErrorCode::invalid_argument, "kron: output size overflows addressable range");
  }
  Matrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          c(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  c.check_finite();
  return c;
}

/// First k columns, as a fresh matrix.
inline Matrix prefix_cols(const Matrix& a, std::size_t k) {
  detail::require_nonempty(a, "prefix_cols");
  if (k == 0 || k > a.cols()) {
    throw Error(ErrorCode::invalid_argument, "prefix_cols: k out of range");
  }
  Matrix c(a.rows(), k);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < k; ++j) c(i, j) = a(i, j);
  return c;
}

/// Column-stacking vectorization: vec(M)[j*rows + i] = M[i,j]. This is the
/// convention under which vec(B*W*C) = (C^T kron B) * vec(W).
inline std::vector<double> vec_cols(const Matrix& a) {
  std::vector<double> v(a.size());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) v[j * a.rows() + i] = a(i, j);
  return v;
}

}  // namespace argd
