// SPDX-License-Identifier: Apache-2.0
#include "pbgru/numerics/matrix.hpp"

#include <string>

#include "pbgru/numerics/errors.hpp"

namespace pbgru {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::size_t Matrix::nonzeros() const {
  std::size_t count = 0;
  for (double v : data) count += (v != 0.0);
  return count;
}

double Matrix::row_sum(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < cols; ++j) s += (*this)(i, j);
  return s;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw ShapeError("matrix product: [" + std::to_string(a.rows) + "x" + std::to_string(a.cols) + "] vs [" +
                     std::to_string(b.rows) + "x" + std::to_string(b.cols) + "]");
  }
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("hadamard: shape mismatch");
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] * b.data[i];
  return c;
}

}  // namespace pbgru
