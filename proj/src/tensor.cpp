#include "bilinear/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace bilinear {

namespace {

std::string shape_str(int rows, int cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols),
      data_(static_cast<std::size_t>(rows > 0 ? rows : 0) * (cols > 0 ? cols : 0),
            fill) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("Matrix: dimensions must be positive, got " +
                                shape_str(rows, cols));
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n, 0.0);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: length mismatch " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const Vector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double norm(const Vector& v) { return std::sqrt(squared_norm(v)); }

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (static_cast<int>(v.size()) != m.cols()) {
    throw std::invalid_argument("matvec: matrix is " + shape_str(m.rows(), m.cols()) +
                                " but vector has length " + std::to_string(v.size()));
  }
  Vector out(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    double acc = 0.0;
    for (int j = 0; j < m.cols(); ++j) acc += r[j] * v[j];
    out[i] = acc;
  }
  return out;
}

Vector vecmat(const Vector& v, const Matrix& m) {
  if (static_cast<int>(v.size()) != m.rows()) {
    throw std::invalid_argument("vecmat: matrix is " + shape_str(m.rows(), m.cols()) +
                                " but vector has length " + std::to_string(v.size()));
  }
  Vector out(m.cols(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    const double vi = v[i];
    for (int j = 0; j < m.cols(); ++j) out[j] += vi * r[j];
  }
  return out;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("frobenius_inner: shape mismatch " +
                                shape_str(a.rows(), a.cols()) + " vs " +
                                shape_str(b.rows(), b.cols()));
  }
  double acc = 0.0;
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) acc += da[i] * db[i];
  return acc;
}

namespace {

// Plane rotation applied to a column pair: (p, q) <- (c p - s q, s p + c q).
void rotate_pair(Vector& p, Vector& q, double c, double s) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    const double qi = q[i];
    p[i] = c * pi - s * qi;
    q[i] = s * pi + c * qi;
  }
}

}  // namespace

SvdResult svd(const Matrix& m, int max_sweeps) {
  if (m.empty()) throw std::invalid_argument("svd: empty matrix");
  for (double x : m.data()) {
    if (!std::isfinite(x)) throw std::invalid_argument("svd: non-finite entry");
  }

  // Work on the tall orientation so columns are the short dimension.
  const bool transposed = m.rows() < m.cols();
  const Matrix a = transposed ? transpose(m) : m;
  const int rows = a.rows();
  const int r = a.cols();  // r = min(m.rows, m.cols)

  std::vector<Vector> u(r, Vector(rows));
  for (int j = 0; j < r; ++j) {
    for (int i = 0; i < rows; ++i) u[j][i] = a(i, j);
  }
  std::vector<Vector> v(r, Vector(r, 0.0));
  for (int j = 0; j < r; ++j) v[j][j] = 1.0;

  // Cyclic one-sided Jacobi: rotate column pairs until all pairs are
  // orthogonal relative to their norms. Quadratic convergence makes the
  // sweep cap generous for the small matrices this library handles.
  const double tol = 1e-14;
  bool converged = (r <= 1);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (int p = 0; p < r - 1; ++p) {
      for (int q = p + 1; q < r; ++q) {
        const double app = squared_norm(u[p]);
        const double aqq = squared_norm(u[q]);
        const double apq = dot(u[p], u[q]);
        if (apq == 0.0 || std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
        converged = false;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_pair(u[p], u[q], c, s);
        rotate_pair(v[p], v[q], c, s);
      }
    }
  }
  if (!converged) {
    throw NumericError("svd: Jacobi iteration did not converge within " +
                       std::to_string(max_sweeps) + " sweeps");
  }

  Vector sigma(r);
  for (int j = 0; j < r; ++j) sigma[j] = norm(u[j]);

  // Sort singular values descending (stable so exact ties keep their order).
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return sigma[i] > sigma[j]; });

  Matrix uu(rows, r);
  Matrix vv(r, r);
  Vector s_sorted(r);
  const double s_max = sigma[order[0]];
  std::vector<int> degenerate;  // columns whose direction is numerically lost
  for (int j = 0; j < r; ++j) {
    const int src = order[j];
    s_sorted[j] = sigma[src];
    if (sigma[src] <= s_max * 1e-12) {
      // The column carries no reliable direction; its singular value is
      // indistinguishable from zero at working precision.
      s_sorted[j] = 0.0;
      degenerate.push_back(j);
      continue;
    }
    for (int i = 0; i < rows; ++i) uu(i, j) = u[src][i] / sigma[src];
  }
  for (int j = 0; j < r; ++j) {
    const int src = order[j];
    for (int i = 0; i < r; ++i) vv(i, j) = v[src][i];
  }

  // Rebuild degenerate U columns as a deterministic orthonormal completion.
  // Zeros sort to the tail, so when column j is rebuilt every column before
  // it is already orthonormal; take the standard basis vector whose residual
  // against those columns is largest.
  for (int j : degenerate) {
    double best_norm2 = -1.0;
    Vector best;
    for (int e = 0; e < rows; ++e) {
      Vector cand(rows, 0.0);
      cand[e] = 1.0;
      for (int k = 0; k < j; ++k) {
        double proj = 0.0;
        for (int i = 0; i < rows; ++i) proj += uu(i, k) * cand[i];
        for (int i = 0; i < rows; ++i) cand[i] -= proj * uu(i, k);
      }
      const double n2 = squared_norm(cand);
      if (n2 > best_norm2) {
        best_norm2 = n2;
        best = cand;
      }
    }
    if (best_norm2 <= 1e-12) {
      throw NumericError("svd: failed to complete an orthonormal basis");
    }
    const double bn = std::sqrt(best_norm2);
    for (int i = 0; i < rows; ++i) uu(i, j) = best[i] / bn;
  }

  if (transposed) return {vv, s_sorted, uu};
  return {uu, s_sorted, vv};
}

Vector gram_schmidt_residual(const std::vector<Vector>& basis, const Vector& v) {
  Vector out = v;
  for (const Vector& b : basis) {
    if (b.size() != v.size()) {
      throw std::invalid_argument(
          "gram_schmidt_residual: basis vector length " + std::to_string(b.size()) +
          " does not match vector length " + std::to_string(v.size()));
    }
    const double nb = norm(b);
    if (nb == 0.0) {
      throw std::invalid_argument("gram_schmidt_residual: zero-norm basis vector");
    }
    // Projection of the *original* v, matching S (S^T v) applied once.
    const double coef = dot(b, v) / (nb * nb);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] -= coef * b[i];
  }
  return out;
}

}  // namespace bilinear
