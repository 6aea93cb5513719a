#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mdd/linalg.hpp"
#include "oracles.hpp"

namespace mdd {
namespace {

TEST(SpdFactorize, ScalarAndIdentity) {
  Eigen::MatrixXd a(1, 1);
  a << 4.0;
  EXPECT_DOUBLE_EQ(spd_factorize(a).lower()(0, 0), 2.0);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_EQ(spd_factorize(eye).lower(), eye);
}

TEST(SpdFactorize, ReconstructsRandomSpd) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_spd(12, rng);
    const auto f = spd_factorize(a);
    const auto& l = f.lower();
    EXPECT_LE((l * l.transpose() - a).norm() / a.norm(), 1e-10);
    EXPECT_TRUE(l.isLowerTriangular());
  }
}

TEST(SpdFactorize, NamesFailingPivot) {
  Eigen::MatrixXd a(3, 3);
  a << 1, 0, 0,
       0, 1, 2,
       0, 2, 1;  // trailing 2x2 block is indefinite
  try {
    (void)spd_factorize(a);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite& e) {
    EXPECT_EQ(e.pivot(), 2u);
    EXPECT_NE(std::string(e.what()).find("pivot 2"), std::string::npos);
  }
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW((void)spd_factorize(zero), NotPositiveDefinite);
}

TEST(SpdFactorize, RandomSolveMatchesExplicitInverse) {
  std::mt19937_64 rng(2);
  const auto a = oracle::random_spd(8, rng);
  const auto b = oracle::random_vector(8, rng);
  const Eigen::VectorXd expected = oracle::explicit_inverse(a) * b;
  EXPECT_LE((solve(spd_factorize(a), b) - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Solve, SmallCases) {
  Eigen::MatrixXd a = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  const auto f = spd_factorize(a);
  const Eigen::VectorXd x = solve(f, Eigen::VectorXd(Eigen::Vector2d(2, 4)));
  EXPECT_DOUBLE_EQ(x(0), 1.0);
  EXPECT_DOUBLE_EQ(x(1), 2.0);
  EXPECT_EQ(solve(f, Eigen::VectorXd(Eigen::VectorXd::Zero(2))), Eigen::VectorXd(Eigen::VectorXd::Zero(2)));
}

TEST(Solve, DimensionMismatch) {
  const auto f = spd_factorize(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_THROW((void)solve(f, Eigen::VectorXd(Eigen::VectorXd::Ones(2))), std::invalid_argument);
  EXPECT_THROW((void)solve(f, Eigen::MatrixXd(Eigen::MatrixXd::Ones(4, 2))), std::invalid_argument);
}

TEST(Solve, MatchesGaussianElimination) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = oracle::random_spd(10, rng);
    const auto b = oracle::random_vector(10, rng);
    const auto x = solve(spd_factorize(a), b);
    EXPECT_LT((x - oracle::gaussian_elimination(a, b)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Solve, ResidualBoundOnHundredSystems) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 25);
    const auto a = oracle::random_spd(n, rng, 1e-3);
    const auto rhs = oracle::random_vector(n, rng);
    const auto x = solve(spd_factorize(a), rhs);
    const double bound = 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    EXPECT_LE((a * x - rhs).lpNorm<Eigen::Infinity>(), bound) << "n=" << n;
  }
}

TEST(Solve, MatrixRightHandSide) {
  std::mt19937_64 rng(5);
  const auto a = oracle::random_spd(6, rng);
  const auto rhs = oracle::random_matrix(6, 3, rng);
  const auto x = solve(spd_factorize(a), rhs);
  EXPECT_LT((a * x - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LinearGram, HandCases) {
  Eigen::MatrixXd x(1, 1);
  x << 1.0;
  auto sys = linear_gram(x, Eigen::VectorXd::Ones(1), 1.0);
  EXPECT_DOUBLE_EQ(sys.a(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(sys.b(0), 1.0);

  // samples e1, e2 with targets 1, 2
  sys = linear_gram(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 2), 0.5);
  EXPECT_EQ(sys.a, Eigen::MatrixXd(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_DOUBLE_EQ(sys.b(0), 0.5);
  EXPECT_DOUBLE_EQ(sys.b(1), 1.0);
}

TEST(LinearGram, MatchesTripleLoop) {
  std::mt19937_64 rng(6);
  const auto x = oracle::random_matrix(5, 3, rng);  // 5 samples, d = 3
  const auto y = oracle::random_vector(5, rng);
  const auto sys = linear_gram(x, y, 0.3);
  const auto [a, b] = oracle::naive_gram(x, y, 0.3);
  EXPECT_LE((sys.a - a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((sys.b - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LinearGram, RejectsNonPositiveLambda) {
  EXPECT_THROW((void)linear_gram(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Ones(2), 0.0), std::invalid_argument);
  EXPECT_THROW((void)linear_gram(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Ones(2), -1.0), std::invalid_argument);
}

TEST(KernelMatrix, ForcedValues) {
  Eigen::MatrixXd x(1, 2);
  x << 0.3, -1.2;
  EXPECT_EQ(kernel_matrix(x, x, {0.7})(0, 0), 1.0);
  // |x - z|^2 = 2 sigma^2 gives e^{-1}
  const double sigma = 1.5;
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd shift(1, 1);
  shift << std::sqrt(2.0) * sigma;
  EXPECT_NEAR(kernel_matrix(zero, shift, {sigma})(0, 0), 0.3678794412, 1e-10);
}

TEST(KernelMatrix, MatchesScalarFormula) {
  std::mt19937_64 rng(7);
  const auto a = oracle::random_matrix(4, 5, rng);
  const auto b = oracle::random_matrix(3, 5, rng);
  const auto k = kernel_matrix(a, b, {1.3});
  ASSERT_EQ(k.rows(), 4);
  ASSERT_EQ(k.cols(), 3);
  for (Eigen::Index p = 0; p < 4; ++p)
    for (Eigen::Index q = 0; q < 3; ++q) EXPECT_NEAR(k(p, q), oracle::gaussian(a.row(p), b.row(q), 1.3), 1e-14);
}

TEST(KernelMatrix, SymmetricUnitDiagonalPsdProperty) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = oracle::random_matrix(10, 4, rng);
    const double sigma = std::pow(2.0, static_cast<double>(trial % 7) - 3.0);
    const auto k = kernel_matrix(s, s, {sigma});
    EXPECT_EQ(k, k.transpose());
    for (Eigen::Index i = 0; i < 10; ++i) EXPECT_EQ(k(i, i), 1.0);
    EXPECT_GE(k.minCoeff(), 0.0);  // tiny bandwidths may underflow to 0
    EXPECT_LE(k.maxCoeff(), 1.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-8);
  }
}

TEST(KernelMatrix, Errors) {
  EXPECT_THROW((void)kernel_matrix(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 2), {0.0}),
               std::invalid_argument);
  EXPECT_THROW((void)kernel_matrix(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(2, 3), {1.0}),
               std::invalid_argument);
}

TEST(FastInverseApply, DirectFormula) {
  const auto r = fast_inverse_apply(Eigen::Vector2d(1, 2), Eigen::Vector2d(2, 4), Eigen::Vector2d(1, 1));
  ASSERT_TRUE(r.has_value());
  EXPECT_DOUBLE_EQ((*r)(0), 1.5);
  EXPECT_DOUBLE_EQ((*r)(1), 0.75);
  // r . b = l (d . c) = 2 * 3
  EXPECT_DOUBLE_EQ(r->dot(Eigen::Vector2d(2, 4)), 6.0);
  const auto zero = fast_inverse_apply(Eigen::Vector2d(1, 2), Eigen::Vector2d(2, 4), Eigen::Vector2d(0, 0));
  EXPECT_EQ(*zero, Eigen::VectorXd(Eigen::VectorXd::Zero(2)));
}

TEST(FastInverseApply, ZeroGuard) {
  EXPECT_FALSE(fast_inverse_apply(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 4), Eigen::Vector2d(1, 1)).has_value());
  EXPECT_FALSE(fast_inverse_apply(Eigen::Vector2d(1, 2), Eigen::Vector2d(1e-13, 1), Eigen::Vector2d(1, 1)).has_value());
  EXPECT_TRUE(fast_inverse_apply(Eigen::Vector2d(1, 2), Eigen::Vector2d(1e-11, 1), Eigen::Vector2d(1, 1)).has_value());
  EXPECT_THROW((void)fast_inverse_apply(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 1, 1), Eigen::Vector2d(1, 1)),
               std::invalid_argument);
}

TEST(FastInverseApply, ConstructiveIdentityProperty) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index l = 1 + trial % 12;
    const auto c = oracle::random_vector(l, rng);
    const auto b = oracle::random_vector(l, rng);
    const auto d = oracle::random_vector(l, rng);
    const auto r = fast_inverse_apply(c, b, d);
    ASSERT_TRUE(r.has_value());
    const double lhs = r->dot(b);
    const double rhs = static_cast<double>(l) * d.dot(c);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

// The elementwise formula is not A^{-1} d for general SPD A.
TEST(FastInverseApply, DivergesFromExactSolve) {
  std::mt19937_64 rng(10);
  const auto a = oracle::random_spd(5, rng);
  const auto b = oracle::random_vector(5, rng);
  const auto d = oracle::random_vector(5, rng);
  const auto f = spd_factorize(a);
  const auto c = solve(f, b);
  const auto exact = solve(f, d);
  const auto fast = fast_inverse_apply(c, b, d);
  ASSERT_TRUE(fast.has_value());
  EXPECT_GT((*fast - exact).norm() / exact.norm(), 0.1);
}

TEST(FastInverseApply, ExactInOneDimension) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a(1, 1);
    a << 0.1 + std::abs(oracle::random_vector(1, rng)(0));
    const auto b = oracle::random_vector(1, rng);
    const auto d = oracle::random_vector(1, rng);
    const auto f = spd_factorize(a);
    const auto fast = fast_inverse_apply(solve(f, b), b, d);
    EXPECT_NEAR((*fast)(0), solve(f, d)(0), 1e-12 * std::max(1.0, std::abs(solve(f, d)(0))));
  }
}

}  // namespace
}  // namespace mdd
