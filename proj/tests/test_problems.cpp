#include <cmath>

#include <gtest/gtest.h>

#include "snpe/problems.hpp"
#include "test_util.hpp"

namespace snpe {
namespace {

using testing::central_difference_gradient;
using testing::central_difference_hessian;
using testing::random_vector;
using testing::relative_error;

LogSumExpProblem symmetric_pair(double rho, double lambda) {
  Matrix a(2, 2);
  a << 1, 0, -1, 0;
  return LogSumExpProblem(a, Vector::Zero(2), rho, lambda);
}

TEST(LogSumExp, SymmetricPairValueIsLog2) {
  const auto p = symmetric_pair(1.0, 0.0);
  EXPECT_NEAR(p.value(Vector::Zero(2)), std::log(2.0), 1e-15);
}

TEST(LogSumExp, RegularizedValueAtOnes) {
  const auto p = symmetric_pair(1.0, 2.0);
  const Vector x = Vector::Ones(2);
  EXPECT_NEAR(p.value(x), std::log(2.0 * std::cosh(1.0)) + 2.0, 1e-14);
}

TEST(LogSumExp, SingleZeroRowIsZero) {
  for (double rho : {0.01, 1.0, 7.5}) {
    LogSumExpProblem p(Matrix::Zero(1, 1), Vector::Zero(1), rho, 0.0);
    EXPECT_EQ(p.value(Vector::Zero(1)), 0.0);
  }
}

TEST(LogSumExp, SymmetricPairGradientVanishes) {
  const auto p = symmetric_pair(1.0, 0.0);
  EXPECT_LE(p.gradient(Vector::Zero(2)).norm(), 1e-15);
}

TEST(LogSumExp, GradientMatchesFiniteDifferencesOnPair) {
  const auto p = symmetric_pair(1.0, 3.0);
  Vector x(2);
  x << 1, 2;
  const Vector fd = central_difference_gradient(p, x, 1e-6);
  EXPECT_LT(relative_error(p.gradient(x), fd), 1e-6);
  const Vector sm = p.softmax(x);
  const Vector expected = p.a().transpose() * sm + 3.0 * x;
  EXPECT_LT((p.gradient(x) - expected).norm(), 1e-14);
}

TEST(LogSumExp, SingleRowGradientIsRowPlusRidge) {
  Matrix a(1, 3);
  a << 0.5, -2.0, 1.5;
  Vector b(1);
  b << 0.3;
  LogSumExpProblem p(a, b, 0.2, 0.7);
  Vector x(3);
  x << 1.0, -1.0, 2.0;
  const Vector expected = a.row(0).transpose() + 0.7 * x;
  EXPECT_EQ(p.gradient(x), expected);
}

TEST(LogSumExp, SoftmaxIsAProbabilityVector) {
  const auto p = generate_synthetic_lse(50, 4, 0.05, 1e-3, 9);
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Vector s = p.softmax(random_vector(4, rng));
    EXPECT_GE(s.minCoeff(), 0.0);
    EXPECT_NEAR(s.sum(), 1.0, 1e-12);
  }
}

TEST(LogSumExp, SymmetricPairHessianIsDiagOneZero) {
  const auto p = symmetric_pair(1.0, 0.0);
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 1.0;
  EXPECT_LT((p.hessian(Vector::Zero(2)) - expected).norm(), 1e-15);
  const Matrix m = p.sqrt_factor(Vector::Zero(2));
  EXPECT_LT((m.transpose() * m - expected).norm(), 1e-15);
}

TEST(LogSumExp, ZeroDataGivesRidgeOnly) {
  LogSumExpProblem p(Matrix::Zero(6, 3), Vector::Zero(6), 0.1, 0.4);
  const Vector x = Vector::Constant(3, 2.0);
  EXPECT_LT((p.hessian(x) - 0.4 * Matrix::Identity(3, 3)).norm(), 1e-15);
  EXPECT_EQ(p.sqrt_factor(x).norm(), 0.0);
}

TEST(LogSumExp, FiniteDifferencesAtTwentyRandomPoints) {
  const auto p = generate_synthetic_lse(20, 5, 0.05, 1e-3, 17);
  Rng rng(2024);
  for (int k = 0; k < 20; ++k) {
    const Vector x = random_vector(5, rng, 0.3);
    EXPECT_LT(relative_error(p.gradient(x), central_difference_gradient(p, x, 1e-6)), 1e-5)
        << "point " << k;
    EXPECT_LT(relative_error(p.hessian(x), central_difference_hessian(p, x, 1e-6)), 1e-5)
        << "point " << k;
  }
}

TEST(LogSumExp, HessianIsSymmetricAndAboveRidge) {
  const double lambda = 1e-3;
  const auto p = generate_synthetic_lse(20, 5, 0.05, lambda, 17);
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const Matrix h = p.hessian(random_vector(5, rng));
    EXPECT_LE(asymmetry(h), 1e-12);
    Matrix data = h;
    data.diagonal().array() -= lambda;
    EXPECT_GE(min_eigenvalue(data), -1e-10);
  }
}

TEST(LogSumExp, SqrtFactorReproducesHessian) {
  const double lambda = 1e-3;
  const auto p = generate_synthetic_lse(20, 5, 0.05, lambda, 17);
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const Vector x = random_vector(5, rng);
    const Matrix m = p.sqrt_factor(x);
    ASSERT_EQ(m.rows(), 20);
    Matrix rebuilt = m.transpose() * m;
    rebuilt.diagonal().array() += lambda;
    EXPECT_LE(symmetric_spectral_norm(rebuilt - p.hessian(x)), 1e-10);
  }
}

TEST(LogSumExp, ValueIsOverflowSafe) {
  const auto p = generate_synthetic_lse(30, 4, 0.05, 1e-3, 3);
  Vector x = Vector::Ones(4);
  x *= 1e6 / x.norm();
  EXPECT_TRUE(std::isfinite(p.value(x)));
  EXPECT_TRUE(p.gradient(x).allFinite());
  EXPECT_TRUE(p.hessian(x).allFinite());
}

TEST(LogSumExp, DimensionMismatchThrows) {
  const auto p = symmetric_pair(1.0, 0.0);
  EXPECT_THROW(p.value(Vector::Zero(3)), std::invalid_argument);
  EXPECT_THROW(p.gradient(Vector::Zero(1)), std::invalid_argument);
  EXPECT_THROW(p.hessian(Vector::Zero(3)), std::invalid_argument);
}

TEST(LogSumExp, ConstructorValidates) {
  EXPECT_THROW(LogSumExpProblem(Matrix::Zero(2, 2), Vector::Zero(3), 1.0, 0.0),
               std::invalid_argument);
  EXPECT_THROW(LogSumExpProblem(Matrix::Zero(2, 2), Vector::Zero(2), 0.0, 0.0),
               std::invalid_argument);
  EXPECT_THROW(LogSumExpProblem(Matrix::Zero(2, 2), Vector::Zero(2), 1.0, -1.0),
               std::invalid_argument);
}

TEST(SyntheticLse, DeterministicGivenSeed) {
  const auto a = generate_synthetic_lse(2, 2, 0.05, 1e-3, 7);
  const auto b = generate_synthetic_lse(2, 2, 0.05, 1e-3, 7);
  EXPECT_EQ(a.a(), b.a());
  EXPECT_EQ(a.b(), b.b());
  const auto c = generate_synthetic_lse(2, 2, 0.05, 1e-3, 8);
  EXPECT_NE(a.a(), c.a());
}

TEST(SyntheticLse, EntriesHaveTheRightDistribution) {
  const auto p = generate_synthetic_lse(10000, 100, 0.05, 1e-3, 1);
  EXPECT_GE(p.b().minCoeff(), 0.0);
  EXPECT_LE(p.b().maxCoeff(), 1.0);
  const double mean = p.a().mean();
  const double var = (p.a().array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.01);
}

TEST(SyntheticLse, RejectsBadSizes) {
  EXPECT_THROW(generate_synthetic_lse(0, 2, 0.05, 1e-3, 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic_lse(2, 0, 0.05, 1e-3, 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic_lse(2, 2, 0.0, 1e-3, 1), std::invalid_argument);
}

TEST(Quadratic, DerivativesAndFactor) {
  Matrix h(2, 2);
  h << 3, 1, 1, 2;
  Vector c(2);
  c << 1, -1;
  QuadraticProblem p(h, c);
  Vector x(2);
  x << 0.5, -0.25;
  EXPECT_NEAR(p.value(x), 0.5 * x.dot(h * x) - c.dot(x), 1e-15);
  EXPECT_LT(relative_error(p.gradient(x), central_difference_gradient(p, x, 1e-6)), 1e-8);
  const Matrix m = p.sqrt_factor(x);
  EXPECT_LT((m.transpose() * m - h).norm(), 1e-12);
  EXPECT_NEAR(p.strong_convexity(), min_eigenvalue(h), 1e-14);
}

TEST(Quadratic, RejectsIndefiniteOrAsymmetric) {
  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  EXPECT_THROW(QuadraticProblem(bad, Vector::Zero(2)), std::invalid_argument);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(QuadraticProblem(asym, Vector::Zero(2)), std::invalid_argument);
}

TEST(FiniteSumQuadratic, MeanOfComponents) {
  const auto p = generate_finite_sum_quadratic(4, 3, 0.1, 5);
  Rng rng(1);
  const Vector x = random_vector(3, rng);
  Matrix h = Matrix::Zero(3, 3);
  for (Index i = 0; i < p.size(); ++i) h += p.component(i).hessian;
  h /= double(p.size());
  EXPECT_LT((p.hessian(x) - h).norm(), 1e-13);
  EXPECT_LT(relative_error(p.gradient(x), central_difference_gradient(p, x, 1e-6)), 1e-7);
  const Matrix m = p.sqrt_factor(x);
  EXPECT_LT((m.transpose() * m - h).norm(), 1e-10);
  EXPECT_GE(min_eigenvalue(h), p.strong_convexity() * (1.0 - 1e-12));
}

TEST(FiniteSumQuadratic, RejectsOverstatedModulus) {
  std::vector<FiniteSumQuadraticProblem::Component> comps{
      {Matrix::Identity(2, 2), Vector::Zero(2)}};
  EXPECT_NO_THROW(FiniteSumQuadraticProblem(comps, 1.0));
  EXPECT_THROW(FiniteSumQuadraticProblem(comps, 2.0), std::invalid_argument);
}

}  // namespace
}  // namespace snpe
