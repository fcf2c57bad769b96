#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"

#include "bilinear/tensor.hpp"

using namespace bilinear;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

double max_abs_offdiag_gram(const Matrix& m) {
  // largest |column_i . column_j - delta_ij| over all pairs, including norms
  double worst = 0.0;
  for (int i = 0; i < m.cols(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      double g = 0.0;
      for (int k = 0; k < m.rows(); ++k) g += m(k, i) * m(k, j);
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

Matrix reconstruct(const SvdResult& r) {
  Matrix out(r.u.rows(), r.v.rows(), 0.0);
  for (int k = 0; k < static_cast<int>(r.s.size()); ++k) {
    for (int i = 0; i < out.rows(); ++i) {
      for (int j = 0; j < out.cols(); ++j) {
        out(i, j) += r.s[k] * r.u(i, k) * r.v(j, k);
      }
    }
  }
  return out;
}

double frob_norm(const Matrix& m) { return std::sqrt(frobenius_inner(m, m)); }

}  // namespace

TEST_CASE("matrix construction validates dimensions") {
  CHECK_THROWS_AS(Matrix(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(Matrix(3, -1), std::invalid_argument);
  Matrix m(2, 3, 1.5);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 1.5);
}

TEST_CASE("matvec basics") {
  CHECK(matvec(Matrix::identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  CHECK(matvec(Matrix(2, 3, 0.0), Vector{1, 1, 1}) == Vector{0, 0});
  CHECK(matvec(from_rows({{1, 2}, {3, 4}}), Vector{1, 1}) == Vector{3, 7});
  CHECK_THROWS_WITH_AS(matvec(Matrix(2, 3), Vector{1, 1, 1, 1}),
                       "matvec: matrix is 2x3 but vector has length 4",
                       std::invalid_argument);
}

TEST_CASE("vecmat basics") {
  CHECK(vecmat(Vector{1, 1}, from_rows({{1, 2}, {3, 4}})) == Vector{4, 6});
  CHECK(vecmat(Vector{0, 0}, from_rows({{5, 6, 7}, {8, 9, 10}})) == Vector{0, 0, 0});
  CHECK(vecmat(Vector{1, 0, 0}, Matrix::identity(3)) == Vector{1, 0, 0});
  CHECK_THROWS_AS(vecmat(Vector{1}, Matrix(2, 2)), std::invalid_argument);
}

TEST_CASE("frobenius inner product basics") {
  CHECK(frobenius_inner(Matrix::identity(2), Matrix::identity(2)) == 2.0);
  CHECK(frobenius_inner(Matrix(2, 2, 0.0), from_rows({{1, 2}, {3, 4}})) == 0.0);
  CHECK(frobenius_inner(from_rows({{1, 2}, {3, 4}}), Matrix(2, 2, 1.0)) == 10.0);
  CHECK_THROWS_AS(frobenius_inner(Matrix(2, 2), Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("matvec and vecmat agree with naive loops on random instances") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(8));
    const int cols = 1 + static_cast<int>(rng.below(8));
    const Matrix m = oracles::random_matrix(rows, cols, rng);
    const Vector vc = oracles::random_vector(cols, rng);
    const Vector vr = oracles::random_vector(rows, rng);

    const Vector got_mv = matvec(m, vc);
    const Vector want_mv = oracles::naive_matvec(m, vc);
    for (int i = 0; i < rows; ++i) {
      CHECK(got_mv[i] == doctest::Approx(want_mv[i]).epsilon(1e-12));
    }
    const Vector got_vm = vecmat(vr, m);
    const Vector want_vm = oracles::naive_vecmat(vr, m);
    for (int j = 0; j < cols; ++j) {
      CHECK(got_vm[j] == doctest::Approx(want_vm[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("frobenius inner equals independently computed trace(a^T b)") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(6));
    const int cols = 1 + static_cast<int>(rng.below(6));
    const Matrix a = oracles::random_matrix(rows, cols, rng);
    const Matrix b = oracles::random_matrix(rows, cols, rng);
    CHECK(frobenius_inner(a, b) ==
          doctest::Approx(oracles::naive_trace_atb(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("svd of a diagonal matrix") {
  const SvdResult r = svd(from_rows({{3, 0}, {0, 1}}));
  REQUIRE(r.s.size() == 2);
  CHECK(r.s[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(r.s[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd of a zero matrix yields zero singular values and orthonormal factors") {
  const SvdResult r = svd(Matrix(2, 3, 0.0));
  REQUIRE(r.s.size() == 2);
  CHECK(r.s[0] == 0.0);
  CHECK(r.s[1] == 0.0);
  CHECK(r.u.rows() == 2);
  CHECK(r.u.cols() == 2);
  CHECK(r.v.rows() == 3);
  CHECK(r.v.cols() == 2);
  CHECK(max_abs_offdiag_gram(r.u) <= 1e-10);
  CHECK(max_abs_offdiag_gram(r.v) <= 1e-10);
}

TEST_CASE("svd reconstruction and orthonormality on random matrices") {
  Rng rng(21);
  for (const auto [rows, cols] :
       std::vector<std::pair<int, int>>{{5, 7}, {7, 5}, {1, 1}, {4, 4}, {28, 28}}) {
    const Matrix m = oracles::random_matrix(rows, cols, rng);
    const SvdResult r = svd(m);
    REQUIRE(static_cast<int>(r.s.size()) == std::min(rows, cols));
    for (std::size_t k = 1; k < r.s.size(); ++k) {
      CHECK(r.s[k - 1] >= r.s[k]);  // nonincreasing
      CHECK(r.s[k] >= 0.0);
    }
    CHECK(max_abs_offdiag_gram(r.u) <= 1e-10);
    CHECK(max_abs_offdiag_gram(r.v) <= 1e-10);
    const Matrix rec = reconstruct(r);
    double err = 0.0;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) err += (rec(i, j) - m(i, j)) * (rec(i, j) - m(i, j));
    }
    CHECK(std::sqrt(err) <= 1e-10 * frob_norm(m));
  }
}

TEST_CASE("svd of an exactly rank-deficient matrix keeps factors orthonormal") {
  // outer product -> rank 1; the remaining columns must still be orthonormal
  Rng rng(33);
  const Vector a = oracles::random_vector(6, rng);
  const Vector b = oracles::random_vector(4, rng);
  Matrix m(6, 4);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) m(i, j) = a[i] * b[j];
  }
  const SvdResult r = svd(m);
  CHECK(r.s[0] == doctest::Approx(norm(a) * norm(b)).epsilon(1e-10));
  for (std::size_t k = 1; k < r.s.size(); ++k) {
    CHECK(r.s[k] <= 1e-12 * r.s[0]);
  }
  CHECK(max_abs_offdiag_gram(r.u) <= 1e-10);
  CHECK(max_abs_offdiag_gram(r.v) <= 1e-10);
  const Matrix rec = reconstruct(r);
  double err = 0.0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) err += (rec(i, j) - m(i, j)) * (rec(i, j) - m(i, j));
  }
  CHECK(std::sqrt(err) <= 1e-10 * frob_norm(m));
}

TEST_CASE("svd reports non-convergence when the sweep cap is too small") {
  Rng rng(5);
  const Matrix m = oracles::random_matrix(6, 6, rng);
  CHECK_THROWS_AS(svd(m, 1), NumericError);
  CHECK_NOTHROW(svd(m));
}

TEST_CASE("svd rejects non-finite input") {
  Matrix m(2, 2, 1.0);
  m(0, 1) = std::nan("");
  CHECK_THROWS_AS(svd(m), std::invalid_argument);
}

TEST_CASE("gram_schmidt_residual basics") {
  const Vector e1{1, 0};
  const Vector e2{0, 1};
  CHECK(gram_schmidt_residual({e1}, e1) == Vector{0, 0});
  CHECK(gram_schmidt_residual({e1}, e2) == Vector{0, 1});

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const Vector r = gram_schmidt_residual({{inv_sqrt2, inv_sqrt2}}, {1, 0});
  CHECK(r[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r[1] == doctest::Approx(-0.5).epsilon(1e-14));

  CHECK_THROWS_AS(gram_schmidt_residual({Vector{0, 0}}, e1), std::invalid_argument);
  CHECK_THROWS_AS(gram_schmidt_residual({Vector{1, 0, 0}}, e1), std::invalid_argument);
}

TEST_CASE("gram_schmidt_residual is orthogonal to orthonormal bases") {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 4 + static_cast<int>(rng.below(6));
    const int basis_size = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(dim - 1)));
    // build an orthonormal basis by sequential orthogonalization
    std::vector<Vector> basis;
    while (static_cast<int>(basis.size()) < basis_size) {
      Vector cand = oracles::random_vector(dim, rng);
      Vector res = basis.empty() ? cand : gram_schmidt_residual(basis, cand);
      const double n = norm(res);
      if (n < 1e-6) continue;
      for (double& x : res) x /= n;
      basis.push_back(res);
    }
    const Vector v = oracles::random_vector(dim, rng);
    const Vector res = gram_schmidt_residual(basis, v);
    for (const Vector& b : basis) {
      CHECK(std::abs(dot(res, b)) <= 1e-10 * norm(v));
    }
  }
}
