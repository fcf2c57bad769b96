#pragma once

#include <vector>

#include "bilinear/errors.hpp"

namespace bilinear {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit reals. Row-major order is part of the
// model serialization contract, so it is fixed here and never overridden.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);
  static Matrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(int i, int j) {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }
  double* row(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const {
    return data_.data() + static_cast<std::size_t>(i) * cols_;
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

double dot(const Vector& a, const Vector& b);
double squared_norm(const Vector& v);
double norm(const Vector& v);

Matrix transpose(const Matrix& m);

// Standard matrix-vector product; v must have length m.cols().
Vector matvec(const Matrix& m, const Vector& v);

// Row-vector times matrix, returned as a vector of length m.cols();
// v must have length m.rows().
Vector vecmat(const Vector& v, const Matrix& m);

// Frobenius inner product sum_ij a_ij * b_ij == trace(a^T b).
double frobenius_inner(const Matrix& a, const Matrix& b);

// Thin SVD m = U diag(s) V^T with U (rows x r) and V (cols x r) having
// orthonormal columns, r = min(rows, cols), s nonincreasing and nonnegative.
// One-sided Jacobi; throws NumericError if not converged within max_sweeps.
struct SvdResult {
  Matrix u;
  Vector s;
  Matrix v;
};
SvdResult svd(const Matrix& m, int max_sweeps = 60);

// Returns v - S (S^T v) where the columns of S are the basis vectors scaled
// to unit norm. The projections are all taken against the original v, which
// is an exact projection only when the basis is orthogonal (the way the
// alternating trainer's initialization uses it).
Vector gram_schmidt_residual(const std::vector<Vector>& basis, const Vector& v);

}  // namespace bilinear
