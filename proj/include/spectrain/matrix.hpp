#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spectrain/errors.hpp"

namespace spectrain {

// Dense real matrix, row-major, double precision.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("Matrix: dimensions must be at least 1x1");
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
      throw std::invalid_argument("Matrix::from_rows: empty input");
    }
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) {
        throw std::invalid_argument("Matrix::from_rows: ragged rows");
      }
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      t(j, i) = a(i, j);
    }
  }
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument(
        "matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
        std::to_string(b.rows()) + ")");
  }
  Matrix c(a.rows(), b.cols());
  // i-k-j order streams b row-wise; per-entry accumulation order matches the
  // naive dot product, so results are bit-identical to the triple loop.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < b.cols(); ++j) {
        ci[j] += aik * bk[j];
      }
    }
  }
  return c;
}

inline double frobenius_norm_sq(const Matrix& a) {
  if (!a.all_finite()) throw NonFiniteError("frobenius_norm_sq: non-finite entry");
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

namespace detail {

inline double row_dot(const Matrix& m, std::size_t p, std::size_t q) {
  const double* a = m.row(p).data();
  const double* b = m.row(q).data();
  double s = 0.0;
  for (std::size_t j = 0; j < m.cols(); ++j) s += a[j] * b[j];
  return s;
}

}  // namespace detail

// Singular values of a, descending, without vectors. Hestenes one-sided
// Jacobi on the shorter side: plane rotations orthogonalize the rows of the
// (transposed if tall) matrix; the singular values are the final row norms.
inline std::vector<double> singular_values(const Matrix& a) {
  if (a.empty()) throw std::invalid_argument("singular_values: empty matrix");
  if (!a.all_finite()) throw NonFiniteError("singular_values: non-finite entry");

  Matrix w = a.rows() >= a.cols() ? transpose(a) : a;
  const std::size_t n = w.rows();

  constexpr double kTol = 1e-14;
  constexpr int kMaxSweeps = 60;

  std::vector<double> sq_norms(n);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (std::size_t p = 0; p < n; ++p) sq_norms[p] = detail::row_dot(w, p, p);
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double app = sq_norms[p];
        const double aqq = sq_norms[q];
        const double apq = detail::row_dot(w, p, q);
        if (std::abs(apq) <= kTol * std::sqrt(app * aqq)) continue;
        rotated = true;

        // Jacobi rotation zeroing the p,q cross term of the Gram matrix.
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                    : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        double* rp = w.row(p).data();
        double* rq = w.row(q).data();
        for (std::size_t j = 0; j < w.cols(); ++j) {
          const double vp = rp[j];
          const double vq = rq[j];
          rp[j] = c * vp - s * vq;
          rq[j] = s * vp + c * vq;
        }
        sq_norms[p] = app - t * apq;
        sq_norms[q] = aqq + t * apq;
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (std::size_t p = 0; p < n; ++p) {
    sv[p] = std::sqrt(std::max(0.0, detail::row_dot(w, p, p)));
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

}  // namespace spectrain
