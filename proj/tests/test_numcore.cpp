#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "siclop/numcore.hpp"
#include "siclop/rng.hpp"

using namespace siclop;
using num::Matrix;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-2.0, 2.0);
  return m;
}

// Central differences of f at every entry of x.
Matrix numeric_gradient(Matrix& x, const std::function<double()>& f, double h = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f();
    x.data()[i] = saved - h;
    const double down = f();
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

double relative_error(const Matrix& a, const Matrix& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    na += a.data()[i] * a.data()[i];
    nb += b.data()[i] * b.data()[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  return scale == 0 ? 0 : std::sqrt(diff) / scale;
}

double weighted_sum(const Matrix& m, const Matrix& w) {
  double s = 0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * w.data()[i];
  return s;
}

}  // namespace

TEST(Matmul, HandExample) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5}, {6}};
  EXPECT_EQ(num::matmul(a, b), (Matrix{{17}, {39}}));
}

TEST(Matmul, IdentityIsExact) {
  Rng rng(3);
  const Matrix m = random_matrix(3, 5, rng);
  EXPECT_EQ(num::matmul(Matrix::identity(3), m), m);
}

TEST(Matmul, ShapeMismatch) {
  try {
    num::matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kShapeMismatch);
  }
}

TEST(Matmul, TransposedVariantsAgree) {
  Rng rng(4);
  const Matrix a = random_matrix(4, 3, rng);
  const Matrix b = random_matrix(4, 5, rng);
  const Matrix c = random_matrix(6, 3, rng);
  Matrix at(3, 4), ct(3, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) at(j, i) = a(i, j);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) ct(j, i) = c(i, j);
  EXPECT_LT(relative_error(num::matmul_tn(a, b), num::matmul(at, b)), 1e-14);
  EXPECT_LT(relative_error(num::matmul_nt(a, c), num::matmul(a, ct)), 1e-14);
}

TEST(Softmax, HandValues) {
  const Matrix p = num::softmax_rows(Matrix{{1, 2, 3}}, 1.0);
  EXPECT_NEAR(p(0, 0), 0.09003, 1e-5);
  EXPECT_NEAR(p(0, 1), 0.24473, 1e-5);
  EXPECT_NEAR(p(0, 2), 0.66524, 1e-5);
}

TEST(Softmax, ZerosAreUniform) {
  const Matrix p = num::softmax_rows(Matrix(2, 9), 1.0);
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 9);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const Matrix p = num::softmax_rows(Matrix{{1000, 0}}, 1.0);
  EXPECT_NEAR(p(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-12);
  EXPECT_TRUE(p.all_finite());
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(5);
  for (double t : {0.3, 1.0, 4.0}) {
    const Matrix p = num::softmax_rows(random_matrix(6, 9, rng), t);
    for (int r = 0; r < p.rows(); ++r) {
      double s = 0;
      for (double v : p.row(r)) {
        s += v;
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, TemperatureMustBePositive) {
  EXPECT_THROW(num::softmax_rows(Matrix(1, 3), 0.0), Error);
  EXPECT_THROW(num::softmax_rows(Matrix(1, 3), -1.0), Error);
}

TEST(Relu, ForwardAndSubgradient) {
  EXPECT_EQ(num::relu(Matrix{{-1, 2}}), (Matrix{{0, 2}}));
  const Matrix g = num::relu_backward(Matrix{{-1, 2, 0}}, Matrix{{1, 1, 1}});
  EXPECT_EQ(g, (Matrix{{0, 1, 0}}));
}

TEST(Gradients, MatmulBackwardMatchesFiniteDifferences) {
  Rng rng(6);
  Matrix a = random_matrix(3, 4, rng);
  Matrix b = random_matrix(4, 2, rng);
  const Matrix w = random_matrix(3, 2, rng);
  auto f = [&] { return weighted_sum(num::matmul(a, b), w); };
  const auto grads = num::matmul_backward(a, b, w);
  EXPECT_LT(relative_error(grads.da, numeric_gradient(a, f)), 1e-4);
  EXPECT_LT(relative_error(grads.db, numeric_gradient(b, f)), 1e-4);
}

TEST(Gradients, ReluBackwardMatchesFiniteDifferences) {
  Rng rng(7);
  Matrix x = random_matrix(4, 5, rng);
  for (double& v : x.data()) {
    if (std::abs(v) < 1e-3) v = 0.5;  // keep away from the kink
  }
  const Matrix w = random_matrix(4, 5, rng);
  auto f = [&] { return weighted_sum(num::relu(x), w); };
  EXPECT_LT(relative_error(num::relu_backward(x, w), numeric_gradient(x, f)), 1e-4);
}

TEST(Gradients, SoftmaxCrossEntropyMatchesFiniteDifferences) {
  Rng rng(8);
  Matrix logits = random_matrix(3, 9, rng);
  Matrix targets(3, 9);
  for (int r = 0; r < 3; ++r) {
    double s = 0;
    for (double& v : targets.row(r)) s += (v = rng.uniform());
    for (double& v : targets.row(r)) v /= s;
  }
  const std::vector<double> weights{1.0, 0.0, 2.5};
  const double t = 0.7;
  auto f = [&] {
    const Matrix p = num::softmax_rows(logits, t);
    double total = 0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 9; ++c) total -= weights[r] * targets(r, c) * std::log(p(r, c));
    return total;
  };
  const Matrix analytic =
      num::softmax_cross_entropy_backward(num::softmax_rows(logits, t), targets, weights, t);
  EXPECT_LT(relative_error(analytic, numeric_gradient(logits, f)), 1e-4);
}

TEST(Helpers, BiasColumnSumsAxpyNorm) {
  Matrix m{{1, 2}, {3, 4}};
  num::add_bias(m, Matrix{{10, 20}});
  EXPECT_EQ(m, (Matrix{{11, 22}, {13, 24}}));
  EXPECT_EQ(num::column_sums(m), (Matrix{{24, 46}}));
  Matrix y{{1, 1}};
  num::axpy(2.0, Matrix{{1, 2}}, y);
  EXPECT_EQ(y, (Matrix{{3, 5}}));
  EXPECT_EQ(num::squared_norm(Matrix{{3, 4}}), 25.0);
  EXPECT_THROW(num::add_bias(m, Matrix{{1, 2, 3}}), Error);
  EXPECT_THROW(num::axpy(1.0, Matrix(1, 3), y), Error);
}
