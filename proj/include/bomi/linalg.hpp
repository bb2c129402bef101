// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bomi/error.hpp"

namespace bomi::linalg {

/// Dense row-major matrix.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Lower Cholesky factor L with A = L L^T.
///
/// Throws SingularityError when a pivot falls below `rel_tol` times the
/// largest diagonal entry of A.
inline Matrix cholesky(const Matrix& a, double rel_tol = 1e-12) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionError("cholesky needs a square matrix");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
  if (!(max_diag > 0.0)) throw SingularityError("matrix has no positive diagonal entry");
  const double floor = rel_tol * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    const auto lj = l.row(j);
    for (std::size_t k = 0; k < j; ++k) d -= lj[k] * lj[k];
    if (!(d > floor)) {
      throw SingularityError("pivot " + std::to_string(j) + " is not positive (" + std::to_string(d) + ")");
    }
    const double piv = std::sqrt(d);
    l(j, j) = piv;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const auto li = l.row(i);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      l(i, j) = s / piv;
    }
  }
  return l;
}

/// Solves L L^T x = b.
inline std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  if (b.size() != n) throw DimensionError("rhs has " + std::to_string(b.size()) + " entries, expected " + std::to_string(n));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  std::vector<double> x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

/// Squared ratio of the extreme Cholesky pivots; an estimate of cond(A).
inline double condition_estimate(const Matrix& l) {
  double lo = l(0, 0), hi = l(0, 0);
  for (std::size_t i = 1; i < l.rows(); ++i) {
    lo = std::min(lo, l(i, i));
    hi = std::max(hi, l(i, i));
  }
  return (hi / lo) * (hi / lo);
}

}  // namespace bomi::linalg
