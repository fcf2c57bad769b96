#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "bilinear/model.hpp"
#include "bilinear/model_io.hpp"

using namespace bilinear;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

BilinearModel random_blr(int rows, int cols, int l_rank, Rng& rng) {
  return {oracles::random_matrix(rows, l_rank, rng),
          oracles::random_matrix(cols, l_rank, rng)};
}

bool bits_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.data().size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("logistic closed forms and identity") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double z = 30.0 * rng.uniform_pm1();
    CHECK(logistic(z) + logistic(-z) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(logistic(z) > 0.0);
    CHECK(logistic(z) < 1.0);
  }
}

TEST_CASE("logistic is stable for |z| up to 700") {
  for (double z : {700.0, -700.0, 500.0, -500.0}) {
    const double y = logistic(z);
    CHECK(std::isfinite(y));
    CHECK(y >= 0.0);
    CHECK(y <= 1.0);
  }
  CHECK(logistic(-700.0) > 0.0);  // no underflow to exactly zero at the contract edge
}

TEST_CASE("softmax closed forms") {
  const Vector half = softmax({0.0, 0.0});
  CHECK(half[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(half[1] == doctest::Approx(0.5).epsilon(1e-15));

  const Vector uniform = softmax({4.2, 4.2, 4.2, 4.2, 4.2});
  for (double y : uniform) CHECK(y == doctest::Approx(0.2).epsilon(1e-14));

  const Vector thirds = softmax({std::log(1.0), std::log(2.0), std::log(3.0)});
  CHECK(thirds[0] == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(thirds[1] == doctest::Approx(2.0 / 6).epsilon(1e-14));
  CHECK(thirds[2] == doctest::Approx(3.0 / 6).epsilon(1e-14));
}

TEST_CASE("softmax sums to one, shift invariant, stable for huge scores") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.below(6));
    Vector z = oracles::random_vector(k, rng, 10.0);
    const Vector y = softmax(z);
    double sum = 0.0;
    for (double v : y) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    Vector shifted = z;
    for (double& v : shifted) v += 123.456;
    const Vector y2 = softmax(shifted);
    for (int i = 0; i < k; ++i) CHECK(y2[i] == doctest::Approx(y[i]).epsilon(1e-12));
  }
  const Vector big = softmax({1000.0, 999.0, -1000.0});
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] + big[1] + big[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("llr_score basics") {
  const Matrix x = from_rows({{1, 2}, {3, 4}});
  CHECK(llr_score({Matrix(2, 2, 0.0)}, x) == 0.0);
  CHECK(llr_score({x}, x) == 30.0);
  CHECK(llr_score({Matrix::identity(2)}, from_rows({{5, 6}, {7, 8}})) == 13.0);
  CHECK_THROWS_AS(llr_score({Matrix(2, 3)}, x), std::invalid_argument);
}

TEST_CASE("blr_score basics") {
  Rng rng(9);
  const Matrix x = oracles::random_matrix(4, 5, rng);
  BilinearModel zero_a{Matrix(4, 2, 0.0), oracles::random_matrix(5, 2, rng)};
  CHECK(blr_score(zero_a, x) == 0.0);

  // L=1 coordinate selector: a=e_2, b=e_3 picks out x(2,3)
  BilinearModel sel{Matrix(4, 1, 0.0), Matrix(5, 1, 0.0)};
  sel.a(2, 0) = 1.0;
  sel.b(3, 0) = 1.0;
  CHECK(blr_score(sel, x) == doctest::Approx(x(2, 3)).epsilon(1e-15));

  BilinearModel bad{Matrix(4, 2), Matrix(5, 3)};
  CHECK_THROWS_AS(blr_score(bad, x), std::invalid_argument);
  CHECK_THROWS_AS(blr_score(sel, Matrix(5, 4, 1.0)), std::invalid_argument);
}

TEST_CASE("blr_score equals llr_score of the reconstruction") {
  Rng rng(17);
  const BilinearModel m = random_blr(5, 7, 3, rng);
  const LinearModel w = reconstruct_w(m);
  for (int i = 0; i < 100; ++i) {
    const Matrix x = oracles::random_matrix(5, 7, rng);
    const double zb = blr_score(m, x);
    const double zl = llr_score(w, x);
    CHECK(std::abs(zb - zl) <= 1e-12 * (1.0 + std::abs(zb)));
  }
}

TEST_CASE("reconstruct_w outer product and zero cases") {
  BilinearModel m{Matrix(2, 1, 0.0), Matrix(2, 1, 0.0)};
  m.a(0, 0) = 1.0;
  m.b(1, 0) = 1.0;
  const LinearModel w = reconstruct_w(m);
  CHECK(w.w(0, 0) == 0.0);
  CHECK(w.w(0, 1) == 1.0);
  CHECK(w.w(1, 0) == 0.0);
  CHECK(w.w(1, 1) == 0.0);

  const LinearModel wz = reconstruct_w({Matrix(3, 2, 0.0), Matrix(4, 2, 1.0)});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(wz.w(i, j) == 0.0);
  }
}

TEST_CASE("decompose_w of a diagonal matrix uses the symmetric sqrt split") {
  const LinearModel w{from_rows({{4, 0}, {0, 1}})};
  const BilinearModel m = decompose_w(w, 2);
  // column norms carry sqrt of the singular values; signs may flip per column
  CHECK(norm(column(m.a, 0)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(norm(column(m.b, 0)) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(norm(column(m.a, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(norm(column(m.b, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  const LinearModel rec = reconstruct_w(m);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      CHECK(rec.w(i, j) == doctest::Approx(w.w(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("decompose_w of the zero matrix is the zero model") {
  const BilinearModel m = decompose_w({Matrix(3, 4, 0.0)}, 3);
  for (const double v : m.a.data()) CHECK(v == 0.0);
  for (const double v : m.b.data()) CHECK(v == 0.0);
}

TEST_CASE("decompose_w round trip at full rank") {
  Rng rng(23);
  for (const auto [rows, cols] : std::vector<std::pair<int, int>>{{5, 7}, {28, 28}}) {
    const LinearModel w{oracles::random_matrix(rows, cols, rng)};
    const BilinearModel m = decompose_w(w, std::min(rows, cols));
    const LinearModel rec = reconstruct_w(m);
    double err = 0.0;
    double ref = 0.0;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        err += (rec.w(i, j) - w.w(i, j)) * (rec.w(i, j) - w.w(i, j));
        ref += w.w(i, j) * w.w(i, j);
      }
    }
    CHECK(std::sqrt(err) < 1e-10 * std::sqrt(ref));
  }
}

TEST_CASE("decompose_w validates the rank range") {
  const LinearModel w{Matrix(3, 5, 1.0)};
  CHECK_THROWS_AS(decompose_w(w, 0), std::invalid_argument);
  CHECK_THROWS_AS(decompose_w(w, 4), std::invalid_argument);
  CHECK_NOTHROW(decompose_w(w, 3));
}

TEST_CASE("blr_score is invariant under the (beta a, b / beta) rescaling") {
  Rng rng(29);
  const BilinearModel m = random_blr(6, 4, 2, rng);
  for (const double beta : {0.1, 2.0, -3.0}) {
    BilinearModel scaled = m;
    for (int l = 0; l < m.rank(); ++l) {
      for (int i = 0; i < m.a.rows(); ++i) scaled.a(i, l) = beta * m.a(i, l);
      for (int j = 0; j < m.b.rows(); ++j) scaled.b(j, l) = m.b(j, l) / beta;
    }
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix x = oracles::random_matrix(6, 4, rng);
      const double z0 = blr_score(m, x);
      const double z1 = blr_score(scaled, x);
      CHECK(std::abs(z1 - z0) <= 1e-12 * (1.0 + std::abs(z0)));
    }
  }
}

TEST_CASE("lsr_scores and bsr_scores basics") {
  Rng rng(31);
  const Matrix x = oracles::random_matrix(3, 4, rng);

  LinearSoftmaxModel zero{{Matrix(3, 4, 0.0), Matrix(3, 4, 0.0), Matrix(3, 4, 0.0)}};
  for (double z : lsr_scores(zero, x)) CHECK(z == 0.0);

  // K=2 antisymmetric pair: softmax head equals logistic of twice the score
  const Matrix w = oracles::random_matrix(3, 4, rng);
  Matrix wneg(3, 4);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) wneg(i, j) = -w(i, j);
  }
  const Vector z2 = lsr_scores({{w, wneg}}, x);
  CHECK(z2[0] == doctest::Approx(-z2[1]).epsilon(1e-15));
  const Vector y2 = softmax(z2);
  CHECK(y2[0] == doctest::Approx(logistic(2.0 * z2[0])).epsilon(1e-12));

  // selector: W_k = e_k e_1^T picks column-1 pixels (0-based column 0)
  LinearSoftmaxModel sel{{Matrix(3, 4, 0.0), Matrix(3, 4, 0.0)}};
  sel.w[0](0, 0) = 1.0;
  sel.w[1](1, 0) = 1.0;
  const Vector zs = lsr_scores(sel, x);
  CHECK(zs[0] == x(0, 0));
  CHECK(zs[1] == x(1, 0));

  BilinearSoftmaxModel bm{{random_blr(3, 4, 2, rng), random_blr(3, 4, 2, rng)}};
  const Vector zb = bsr_scores(bm, x);
  for (std::size_t k = 0; k < bm.classes.size(); ++k) {
    const double want = llr_score(reconstruct_w(bm.classes[k]), x);
    CHECK(std::abs(zb[k] - want) <= 1e-12 * (1.0 + std::abs(want)));
  }

  BilinearSoftmaxModel zero_b{{BilinearModel{Matrix(3, 2, 0.0), Matrix(4, 2, 0.5)},
                               BilinearModel{Matrix(3, 2, 0.0), Matrix(4, 2, 0.5)}}};
  const Vector yz = softmax(bsr_scores(zero_b, x));
  CHECK(yz[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("model serialization round trips bit-exactly") {
  Rng rng(41);
  // values chosen to stress shortest-round-trip formatting
  auto spice = [&](Matrix& m) {
    if (m.data().size() >= 4) {
      m.data()[0] = 0.1;
      m.data()[1] = -0.0;
      m.data()[2] = 1.0 / 3.0;
      m.data()[3] = 5e-324;  // smallest denormal
    }
  };

  LinearModel llr{oracles::random_matrix(3, 5, rng)};
  spice(llr.w);
  BilinearModel blr = random_blr(4, 3, 2, rng);
  spice(blr.a);
  LinearSoftmaxModel lsr{{oracles::random_matrix(2, 3, rng),
                          oracles::random_matrix(2, 3, rng),
                          oracles::random_matrix(2, 3, rng)}};
  spice(lsr.w[1]);
  BilinearSoftmaxModel bsr{{random_blr(3, 4, 2, rng), random_blr(3, 4, 2, rng)}};
  spice(bsr.classes[1].b);

  {
    std::stringstream ss;
    save_model(ss, llr);
    const AnyModel back = load_model(ss);
    CHECK(model_kind(back) == "llr");
    CHECK(bits_equal(std::get<LinearModel>(back).w, llr.w));
  }
  {
    std::stringstream ss;
    save_model(ss, blr);
    const AnyModel back = load_model(ss);
    CHECK(model_kind(back) == "blr");
    CHECK(bits_equal(std::get<BilinearModel>(back).a, blr.a));
    CHECK(bits_equal(std::get<BilinearModel>(back).b, blr.b));
  }
  {
    std::stringstream ss;
    save_model(ss, lsr);
    const AnyModel back = load_model(ss);
    CHECK(model_kind(back) == "lsr");
    for (int k = 0; k < 3; ++k) {
      CHECK(bits_equal(std::get<LinearSoftmaxModel>(back).w[k], lsr.w[k]));
    }
  }
  {
    std::stringstream ss;
    save_model(ss, bsr);
    const AnyModel back = load_model(ss);
    CHECK(model_kind(back) == "bsr");
    for (int k = 0; k < 2; ++k) {
      CHECK(bits_equal(std::get<BilinearSoftmaxModel>(back).classes[k].a,
                       bsr.classes[k].a));
      CHECK(bits_equal(std::get<BilinearSoftmaxModel>(back).classes[k].b,
                       bsr.classes[k].b));
    }
  }
}

TEST_CASE("model loader rejects malformed files") {
  auto load_str = [](const std::string& text) {
    std::stringstream ss(text);
    return load_model(ss);
  };
  CHECK_THROWS_AS(load_str("frobnicator 2 2\n1 2 3 4"), DataError);
  CHECK_THROWS_AS(load_str("llr 2 2\n1 2 3"), DataError);            // truncated
  CHECK_THROWS_AS(load_str("llr 2 2\n1 2 3 4 5"), DataError);        // trailing
  CHECK_THROWS_AS(load_str("llr 2 2\n1 2 three 4"), DataError);      // bad number
  CHECK_THROWS_AS(load_str("llr 2 2\n1 2 inf 4"), DataError);        // non-finite
  CHECK_THROWS_AS(load_str("llr 0 2\n"), DataError);                 // bad dims
  CHECK_THROWS_AS(load_str("lsr 2 2 1\n1 2 3 4"), DataError);        // K < 2
  CHECK_THROWS_AS(load_str(""), DataError);                          // empty
  CHECK_NOTHROW(load_str("blr 2 2 1\n1 2\n3 4"));
}
