#include "bilinear/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bilinear {

namespace {

void check_same_shape(const Matrix& x, int rows, int cols, const char* who) {
  if (x.rows() != rows || x.cols() != cols) {
    throw std::invalid_argument(std::string(who) + ": input is " +
                                std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()) + " but model expects " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
}

}  // namespace

double logistic(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Vector softmax(const Vector& z) {
  if (z.empty()) throw std::invalid_argument("softmax: empty input");
  const double zmax = *std::max_element(z.begin(), z.end());
  Vector y(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    y[k] = std::exp(z[k] - zmax);
    sum += y[k];
  }
  for (double& v : y) v /= sum;
  return y;
}

double llr_score(const LinearModel& m, const Matrix& x) {
  check_same_shape(x, m.w.rows(), m.w.cols(), "llr_score");
  return frobenius_inner(m.w, x);
}

double blr_score(const BilinearModel& m, const Matrix& x) {
  if (m.a.cols() != m.b.cols()) {
    throw std::invalid_argument("blr_score: A has " + std::to_string(m.a.cols()) +
                                " columns but B has " + std::to_string(m.b.cols()));
  }
  check_same_shape(x, m.a.rows(), m.b.rows(), "blr_score");
  double z = 0.0;
  for (int l = 0; l < m.rank(); ++l) {
    // a_l^T (X b_l)
    double term = 0.0;
    for (int i = 0; i < x.rows(); ++i) {
      const double* xr = x.row(i);
      double xb = 0.0;
      for (int j = 0; j < x.cols(); ++j) xb += xr[j] * m.b(j, l);
      term += m.a(i, l) * xb;
    }
    z += term;
  }
  return z;
}

Vector lsr_scores(const LinearSoftmaxModel& m, const Matrix& x) {
  if (m.w.size() < 2) {
    throw std::invalid_argument("lsr_scores: need at least 2 classes");
  }
  Vector z(m.w.size());
  for (std::size_t k = 0; k < m.w.size(); ++k) {
    z[k] = llr_score(LinearModel{m.w[k]}, x);
  }
  return z;
}

Vector bsr_scores(const BilinearSoftmaxModel& m, const Matrix& x) {
  if (m.classes.size() < 2) {
    throw std::invalid_argument("bsr_scores: need at least 2 classes");
  }
  Vector z(m.classes.size());
  for (std::size_t k = 0; k < m.classes.size(); ++k) {
    z[k] = blr_score(m.classes[k], x);
  }
  return z;
}

LinearModel reconstruct_w(const BilinearModel& m) {
  Matrix w(m.a.rows(), m.b.rows(), 0.0);
  for (int l = 0; l < m.rank(); ++l) {
    for (int i = 0; i < w.rows(); ++i) {
      const double ai = m.a(i, l);
      for (int j = 0; j < w.cols(); ++j) w(i, j) += ai * m.b(j, l);
    }
  }
  return {w};
}

BilinearModel decompose_w(const LinearModel& m, int l_rank) {
  const int max_rank = std::min(m.w.rows(), m.w.cols());
  if (l_rank < 1 || l_rank > max_rank) {
    throw std::invalid_argument("decompose_w: L=" + std::to_string(l_rank) +
                                " out of range [1, " + std::to_string(max_rank) + "]");
  }
  const SvdResult r = svd(m.w);
  Matrix a(m.w.rows(), l_rank);
  Matrix b(m.w.cols(), l_rank);
  for (int l = 0; l < l_rank; ++l) {
    const double root = std::sqrt(r.s[l]);
    for (int i = 0; i < a.rows(); ++i) a(i, l) = root * r.u(i, l);
    for (int j = 0; j < b.rows(); ++j) b(j, l) = root * r.v(j, l);
  }
  return {a, b};
}

Vector column(const Matrix& m, int j) {
  Vector v(m.rows());
  for (int i = 0; i < m.rows(); ++i) v[i] = m(i, j);
  return v;
}

void set_column(Matrix& m, int j, const Vector& v) {
  if (static_cast<int>(v.size()) != m.rows()) {
    throw std::invalid_argument("set_column: length mismatch");
  }
  for (int i = 0; i < m.rows(); ++i) m(i, j) = v[i];
}

}  // namespace bilinear
