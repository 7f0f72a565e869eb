#pragma once

// Small dense vectors and matrices, just enough for affine charts and
// Gaussian mixtures in dimensions of a few dozen.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "did/rng.hpp"

namespace did {

using Vec = std::vector<double>;

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

inline double dot(const Vec& x, const Vec& y) {
  check_dim(y.size(), x.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vec& x) { return dot(x, x); }
inline double norm(const Vec& x) { return std::sqrt(norm2(x)); }

inline Vec add(Vec x, const Vec& y) {
  check_dim(y.size(), x.size(), "add");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  return x;
}

inline Vec sub(Vec x, const Vec& y) {
  check_dim(y.size(), x.size(), "sub");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= y[i];
  return x;
}

inline Vec scale(Vec x, double c) {
  for (double& v : x) v *= c;
  return x;
}

// y += c * x
inline void axpy(double c, const Vec& x, Vec& y) {
  check_dim(y.size(), x.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline Vec matvec(const Matrix& m, const Vec& x) {
  check_dim(x.size(), m.cols, "matvec");
  Vec y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

// y = Mᵀ x
inline Vec tmatvec(const Matrix& m, const Vec& x) {
  check_dim(x.size(), m.rows, "tmatvec");
  Vec y(m.cols, 0.0);
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) s += m(i, j) * x[i];
    y[j] = s;
  }
  return y;
}

inline Matrix columns(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.cols) throw std::invalid_argument("columns: out of range");
  Matrix r(m.rows, count);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < count; ++j) r(i, j) = m(i, first + j);
  return r;
}

inline Vec column(const Matrix& m, std::size_t j) {
  Vec v(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) v[i] = m(i, j);
  return v;
}

// Largest absolute entry of MᵀM − I, a cheap orthonormality certificate.
inline double orthonormality_defect(const Matrix& m) {
  double worst = 0.0;
  for (std::size_t p = 0; p < m.cols; ++p)
    for (std::size_t q = 0; q < m.cols; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < m.rows; ++i) s += m(i, p) * m(i, q);
      double target = (p == q) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(s - target));
    }
  return worst;
}

// Modified Gram-Schmidt with one reorthogonalization pass. Columns whose
// residual norm falls below drop_tol are dropped, so the result has full
// column rank and an orthonormality defect near machine precision.
inline Matrix orthonormalize(const Matrix& m, double drop_tol = 1e-10) {
  std::vector<Vec> basis;
  for (std::size_t j = 0; j < m.cols; ++j) {
    Vec v = column(m, j);
    for (int pass = 0; pass < 2; ++pass)
      for (const Vec& b : basis) axpy(-dot(b, v), b, v);
    double n = norm(v);
    if (n > drop_tol) basis.push_back(scale(std::move(v), 1.0 / n));
  }
  Matrix r(m.rows, basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t i = 0; i < m.rows; ++i) r(i, j) = basis[j][i];
  return r;
}

// Random orthogonal matrix: orthonormalized Gaussian sample. For the sizes
// used here MGS with reorthogonalization keeps the defect near 1e-15.
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.gaussian();
  Matrix q = orthonormalize(g);
  while (q.cols < n) {  // rank deficiency has probability ~0 but stay total
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.gaussian();
    q = orthonormalize(g);
  }
  return q;
}

}  // namespace did
