#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sfd {

/// Dense row-major double matrix. Deliberately minimal: the library only
/// needs storage, indexing and a couple of small products.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// C = A * B (naive; used only for small theory-side shapes).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

/// In-place Cholesky of a symmetric PSD matrix; returns the lower factor.
/// Throws std::domain_error if a pivot goes meaningfully negative.
inline Matrix cholesky(const Matrix& m) {
  if (m.rows != m.cols) throw std::invalid_argument("cholesky: not square");
  const std::size_t n = m.rows;
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s < -1e-10) throw std::domain_error("cholesky: matrix not PSD");
        l(i, j) = s > 0.0 ? std::sqrt(s) : 0.0;
      } else {
        l(i, j) = l(j, j) > 0.0 ? s / l(j, j) : 0.0;
      }
    }
  }
  return l;
}

}  // namespace sfd
