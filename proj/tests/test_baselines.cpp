#include "oracles.hpp"

#include "pnpcs/baselines.hpp"

#include <gtest/gtest.h>

using namespace pnpcs;

namespace {

Vector sparse_vector(Index n, Index s, std::uint64_t seed)
{
  std::mt19937_64 eng(seed);
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), eng);
  std::normal_distribution<double> g(0.0, 1.0);
  Vector x = Vector::Zero(n);
  for (Index k = 0; k < s; ++k) {
    const double v = g(eng);
    x[idx[static_cast<std::size_t>(k)]] = v + (v >= 0 ? 1.0 : -1.0);
  }
  return x;
}

} // namespace

TEST(CoSaMP, ZeroMeasurementsGiveZero)
{
  const Matrix a = oracle::random_matrix(10, 30, 1);
  const auto est = cosamp(a, Vector::Zero(10), 3, 10);
  EXPECT_EQ(est.x_hat.norm(), 0.0);
  EXPECT_TRUE(est.support.empty());
}

TEST(CoSaMP, RecoversSparseSignals)
{
  int exact = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto op = SensingOperator::make_gaussian(20, 64, 1000 + s);
    const Vector x = sparse_vector(64, 2, 2000 + s);
    const auto est = cosamp(op, op.apply(x), 2, 20);
    if ((est.x_hat - x).norm() <= 1e-8 * x.norm()) ++exact;
  }
  EXPECT_GE(exact, 95);
}

TEST(CoSaMP, ResidualNeverExceedsData)
{
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix a = oracle::random_matrix(12, 40, 50 + s) / std::sqrt(12.0);
    const Vector b = oracle::random_vector(12, 80 + s);
    const auto est = cosamp(a, b, 5, 15);
    EXPECT_LE((b - a * est.x_hat).norm(), b.norm() * (1 + 1e-14));
    EXPECT_LE(static_cast<Index>(est.support.size()), 5);
    EXPECT_EQ(est.residual_history.front(), b.norm());
  }
}

TEST(CoSaMP, WellConditionedSquareGivesThresholdedLeastSquares)
{
  const Index n = 32, s = 8;
  const Matrix a = Matrix::Identity(n, n) + 0.05 * oracle::random_matrix(n, n, 17) / std::sqrt(double(n));
  const Vector b = a * sparse_vector(n, s, 18);
  const auto est = cosamp(a, b, s, 30);
  // Full least squares by normal equations, then keep the s largest entries.
  const Vector ls = oracle::normal_equations(a, b);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return std::abs(ls[i]) > std::abs(ls[j]); });
  Vector expect = Vector::Zero(n);
  std::vector<Index> support(order.begin(), order.begin() + s);
  std::sort(support.begin(), support.end());
  for (Index i : support) expect[i] = ls[i];
  EXPECT_EQ(est.support, support);
  EXPECT_LE((est.x_hat - expect).norm(), 1e-10 * expect.norm());
}

TEST(CoSaMP, RejectsBadSparsity)
{
  const Matrix a = oracle::random_matrix(10, 30, 1);
  const Vector b = Vector::Ones(10);
  EXPECT_THROW(cosamp(a, b, 0, 5), ConfigError);
  EXPECT_THROW(cosamp(a, b, 11, 5), ConfigError);
  EXPECT_NO_THROW(cosamp(a, b, 10, 5));
  EXPECT_THROW(cosamp(a, Vector::Ones(9), 2, 5), ConfigError);
}

TEST(TopK, TiesPreferLowerIndex)
{
  Vector v(6);
  v << 1.0, -3.0, 2.0, 3.0, -2.0, 0.5;
  EXPECT_EQ(detail::top_k(v, 2), (std::vector<Index>{1, 3}));
  EXPECT_EQ(detail::top_k(v, 3), (std::vector<Index>{1, 2, 3}));
  EXPECT_EQ(detail::top_k(v, 10).size(), 6u);
}

TEST(Lasso, LargePenaltyGivesZero)
{
  const Matrix a = oracle::random_matrix(15, 25, 3);
  const Vector b = oracle::random_vector(15, 4);
  const double lmax = (a.transpose() * b).cwiseAbs().maxCoeff();
  const auto res = lasso_ista(a, b, lmax, 50);
  EXPECT_EQ(res.x.norm(), 0.0);
}

TEST(Lasso, VanishingPenaltyGivesLeastSquares)
{
  const Matrix a = oracle::random_matrix(30, 8, 5);
  const Vector b = oracle::random_vector(30, 6);
  const auto res = lasso_ista(a, b, 1e-10, 20000, 1e-14);
  EXPECT_LE((res.x - oracle::normal_equations(a, b)).norm(), 1e-4);
}

TEST(Lasso, MonotoneAndStationary)
{
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix a = oracle::random_matrix(20, 50, 100 + s) / std::sqrt(20.0);
    const Vector b = oracle::random_vector(20, 200 + s);
    const double lmax = (a.transpose() * b).cwiseAbs().maxCoeff();
    const auto res = lasso_ista(a, b, 0.1 * lmax, 20000, 1e-12);
    EXPECT_TRUE(res.monotone);
    EXPECT_LE(res.fixed_point_residual, 1e-6);
    // Subgradient optimality: |aⱼᵀ(b − Ax)| ≤ λ, with equality and matching sign on the support.
    const Vector corr = a.transpose() * (b - a * res.x);
    for (Index j = 0; j < 50; ++j) {
      if (res.x[j] != 0.0) EXPECT_NEAR(corr[j], 0.1 * lmax * (res.x[j] > 0 ? 1.0 : -1.0), 1e-5);
      else EXPECT_LE(std::abs(corr[j]), 0.1 * lmax + 1e-5);
    }
  }
}

TEST(Lasso, RejectsBadArguments)
{
  const Matrix a = oracle::random_matrix(5, 5, 1);
  EXPECT_THROW(lasso_ista(a, Vector::Ones(5), -1.0, 10), ConfigError);
  EXPECT_THROW(lasso_ista(a, Vector::Ones(5), 1.0, 0), ConfigError);
}

TEST(SoftThreshold, ShrinksTowardZero)
{
  Vector v(5);
  v << -2.0, -0.5, 0.0, 0.3, 1.5;
  Vector expect(5);
  expect << -1.0, 0.0, 0.0, 0.0, 0.5;
  EXPECT_EQ(detail::soft_threshold(v, 1.0), expect);
}
