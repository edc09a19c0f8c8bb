#include "oracles.hpp"

#include "pnpcs/sensing.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace pnpcs;

namespace {

std::vector<SensingOperator> one_of_each(Index m, Index n, std::uint64_t seed)
{
  return {SensingOperator::make_gaussian(m, n, seed), SensingOperator::make_rademacher(m, n, seed),
          SensingOperator::make_structured(m, n, Transform::walsh_hadamard, seed),
          SensingOperator::make_structured(m, n, Transform::dft, seed)};
}

} // namespace

TEST(Gaussian, DeterministicUnderSeed)
{
  const auto a = SensingOperator::make_gaussian(3, 5, 7);
  const auto b = SensingOperator::make_gaussian(3, 5, 7);
  const auto c = SensingOperator::make_gaussian(3, 5, 8);
  EXPECT_EQ((a.dense_entries() - b.dense_entries()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((a.dense_entries() - c.dense_entries()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gaussian, EntryMomentsMatchScaling)
{
  const Index m = 100, n = 100;
  const auto a = SensingOperator::make_gaussian(m, n, 3).dense_entries();
  const double mean = a.mean();
  const double se = (1.0 / std::sqrt(double(m))) / std::sqrt(double(m * n));
  EXPECT_LE(std::abs(mean), 3.0 * se);
  const double var = (a.array() - mean).square().sum() / double(m * n - 1);
  EXPECT_NEAR(var * m, 1.0, 0.2);
}

TEST(Gaussian, ColumnNormsAreOneInExpectation)
{
  double acc = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) acc += SensingOperator::make_gaussian(20, 10, s).apply(Vector::Unit(10, 3)).squaredNorm();
  EXPECT_NEAR(acc / 200.0, 1.0, 0.15);
}

TEST(Rademacher, EntriesAreExactlyPlusMinusInverseSqrtM)
{
  const auto a = SensingOperator::make_rademacher(50, 50, 1).dense_entries();
  const double v = 1.0 / std::sqrt(50.0);
  long plus = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const double e = a.data()[i];
    ASSERT_TRUE(e == v || e == -v);
    plus += e > 0;
  }
  const double frac = double(plus) / double(a.size());
  EXPECT_GE(frac, 0.4);
  EXPECT_LE(frac, 0.6);
  for (Index j = 0; j < 50; ++j) EXPECT_NEAR(a.col(j).squaredNorm(), 1.0, 1e-14);
}

TEST(Rademacher, MaterializeEqualsApply)
{
  const auto op = SensingOperator::make_rademacher(3, 4, 11);
  const Vector x = oracle::random_vector(4, 1);
  EXPECT_EQ((op.materialize() * x - op.apply(x)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Structured, HadamardFirstColumnIsConstant)
{
  std::vector<Index> rows{0, 1, 2, 3, 4};
  const auto op = SensingOperator::make_structured_explicit(16, Transform::walsh_hadamard, rows, Vector::Ones(16));
  const Vector y = op.apply(Vector::Unit(16, 0));
  for (Index k = 0; k < 5; ++k) EXPECT_NEAR(y[k], 1.0 / std::sqrt(5.0), 1e-15);
}

TEST(Structured, MatchesDenseOracles)
{
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto wht = SensingOperator::make_structured(6, 16, Transform::walsh_hadamard, seed);
    const Matrix ref_w = oracle::dense_sfd_hadamard(16, wht.sample_indices(), wht.sign_flips());
    EXPECT_LE((wht.materialize() - ref_w).cwiseAbs().maxCoeff(), 1e-10);

    const auto dft = SensingOperator::make_structured(6, 12, Transform::dft, seed);
    ASSERT_EQ(dft.rows(), 12);
    const Matrix ref_f = oracle::dense_sfd_dft(12, dft.sample_indices(), dft.sign_flips());
    EXPECT_LE((dft.materialize() - ref_f).cwiseAbs().maxCoeff(), 1e-10);

    for (const auto* op : {&wht, &dft}) {
      const Matrix a = op->materialize();
      const Matrix ata = a.transpose() * a;
      for (Index i = 0; i < op->n(); i += 5)
        EXPECT_LE((op->adjoint(op->apply(Vector::Unit(op->n(), i))) - ata.col(i)).norm(), 1e-10);
    }
  }
}

TEST(Structured, SamplingInvariants)
{
  const auto op = SensingOperator::make_structured(40, 64, Transform::walsh_hadamard, 5);
  const auto& rows = op.sample_indices();
  EXPECT_EQ(std::set<Index>(rows.begin(), rows.end()).size(), 40u);
  for (Index i = 0; i < 64; ++i) EXPECT_EQ(std::abs(op.sign_flips()[i]), 1.0);
  EXPECT_THROW(SensingOperator::make_structured(4, 12, Transform::walsh_hadamard, 1), ConfigError);
  EXPECT_NO_THROW(SensingOperator::make_structured(4, 12, Transform::dft, 1));
  EXPECT_THROW(SensingOperator::make_structured(20, 16, Transform::dft, 1), ConfigError);
  EXPECT_THROW(SensingOperator::make_structured_explicit(8, Transform::dft, {1, 1}, Vector::Ones(8)), ConfigError);
}

TEST(Structured, FastTransformIsScaledInvolution)
{
  Vector x = oracle::random_vector(32, 4);
  Vector y = x;
  fwht(y);
  fwht(y);
  EXPECT_LE((y - 32.0 * x).norm(), 1e-12 * x.norm() * 32);
  EXPECT_TRUE(is_power_of_two(1024));
  EXPECT_FALSE(is_power_of_two(96));
}

TEST(Sensing, AdjointConsistency)
{
  for (const auto& op : one_of_each(8, 16, 42)) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Vector x = oracle::random_vector(op.n(), 10 + s);
      const Vector y = oracle::random_vector(op.rows(), 50 + s);
      const double lhs = op.apply(x).dot(y), rhs = x.dot(op.adjoint(y));
      EXPECT_NEAR(lhs, rhs, 1e-10 * (1.0 + std::abs(lhs)));
    }
  }
}

TEST(Sensing, IsometryInExpectation)
{
  const Vector x = oracle::random_vector(32, 77).normalized();
  for (int k = 0; k < 4; ++k) {
    double acc = 0.0;
    for (std::uint64_t s = 0; s < 500; ++s) acc += one_of_each(8, 32, 1000 + s)[static_cast<std::size_t>(k)].apply(x).squaredNorm();
    EXPECT_NEAR(acc / 500.0, 1.0, 0.1) << "kind " << k;
  }
}

TEST(Sensing, ReconstructibleFromTuple)
{
  for (auto kind : {SensingKind::gaussian, SensingKind::rademacher, SensingKind::structured}) {
    const auto a = make_operator(kind, 5, 16, 99, Transform::dft);
    const auto b = make_operator(kind, 5, 16, 99, Transform::dft);
    EXPECT_EQ((a.materialize() - b.materialize()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(a.seed(), 99u);
    EXPECT_EQ(parse_sensing_kind(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_sensing_kind("fourier"), ConfigError);
}
