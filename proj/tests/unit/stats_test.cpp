// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "epsnet/error.hpp"
#include "epsnet/linalg.hpp"
#include "epsnet/rank_tests.hpp"
#include "oracles.hpp"

using namespace epsnet;
namespace oracle = epsnet::oracle;

TEST(Ols, MatchesNormalEquations) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(50, 3);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    X(i, 0) = z(rng);
    X(i, 1) = 1000.0 * z(rng);
    X(i, 2) = 1.0;
    y(i) = 2 * X(i, 0) - 0.003 * X(i, 1) + 5 + 0.1 * z(rng);
  }
  const auto fit = ols(X, y, {"a", "b", "const"});
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::VectorXd ref = xtx.ldlt().solve(X.transpose() * y);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(fit.coef(j), ref(j), 1e-9 * std::max(1.0, std::abs(ref(j))));
  EXPECT_TRUE(fit.xtx_inverse.isApprox(xtx.inverse(), 1e-9));
  EXPECT_NEAR(fit.residual_variance, (y - X * ref).squaredNorm() / 47.0, 1e-12);
  EXPECT_EQ(fit.n, 50u);
}

TEST(Ols, RankErrorNamesDependentColumn) {
  Eigen::MatrixXd X(6, 3);
  X << 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10, 1, 6, 12, 1;
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(6, 0, 1);
  try {
    ols(X, y, {"a", "twice_a", "const"});
    FAIL() << "expected RankError";
  } catch (const RankError& e) {
    ASSERT_EQ(e.columns().size(), 1u);
    EXPECT_TRUE(e.columns()[0] == "a" || e.columns()[0] == "twice_a");
  }
  Eigen::MatrixXd Z = X;
  Z.col(2).setZero();
  try {
    ols(Z, y, {"a", "b", "zero"});
    FAIL();
  } catch (const RankError& e) {
    EXPECT_EQ(e.columns(), std::vector<std::string>{"zero"});
  }
  EXPECT_THROW(ols(X.topRows(2), y.head(2)), ShapeError);
  EXPECT_THROW(ols(X, y.head(5)), ShapeError);
}

TEST(AverageRanks, TiesShareMeanRank) {
  const std::vector<double> v{3, 1, 3, 2};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Wilcoxon, AllPositiveSixIsOneOverThirtyTwo) {
  const std::vector<double> d{1, 2, 3, 4, 5, 6};
  const auto r = wilcoxon_signed_rank(d);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.statistic, 21.0);
  EXPECT_NEAR(r.p_value, 0.03125, 1e-15);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTiesAndZeros) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(-4, 4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> d(12);
    for (double& x : d) x = u(rng);
    const auto r = wilcoxon_signed_rank(d, PValueMethod::Exact);
    EXPECT_NEAR(r.p_value, oracle::wilcoxon_enumerated_p(d), 1e-12) << trial;
  }
}

TEST(Wilcoxon, DegenerateWhenAllZero) {
  const std::vector<double> a{1, 2}, b{1, 2};
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n, 0u);
}

TEST(Wilcoxon, NormalApproximationCloseToExactAtTwenty) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.3, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> d(20);
    for (double& x : d) x = z(rng);
    const double exact = wilcoxon_signed_rank(d, PValueMethod::Exact).p_value;
    EXPECT_NEAR(wilcoxon_signed_rank(d, PValueMethod::Normal).p_value, exact, 0.01);
    if (trial < 2) {
      EXPECT_NEAR(exact, oracle::wilcoxon_enumerated_p(d), 1e-12);
    }
  }
}

TEST(MannWhitney, DisjointTriplesIsOneTenth) {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto r = mann_whitney_u(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.p_value, 0.1, 1e-15);
  EXPECT_NEAR(mann_whitney_u(b, a).p_value, 0.1, 1e-15);
}

TEST(MannWhitney, ExactMatchesEnumerationWithTies) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> u(0, 6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(5), b(7);
    for (double& x : a) x = u(rng);
    for (double& x : b) x = u(rng) + 1;
    const auto r = mann_whitney_u(a, b, PValueMethod::Exact);
    if (r.degenerate) continue;
    EXPECT_NEAR(r.p_value, oracle::mann_whitney_enumerated_p(a, b), 1e-12) << trial;
  }
}

TEST(MannWhitney, NormalApproximationCloseToExactAtTwenty) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> a(10), b(10);
    for (double& x : a) x = z(rng);
    for (double& x : b) x = z(rng) + 0.5;
    const double exact = mann_whitney_u(a, b, PValueMethod::Exact).p_value;
    EXPECT_NEAR(mann_whitney_u(a, b, PValueMethod::Normal).p_value, exact, 0.01);
    if (trial < 2) {
      EXPECT_NEAR(exact, oracle::mann_whitney_enumerated_p(a, b), 1e-12);
    }
  }
}

TEST(MannWhitney, AllTiedIsDegenerate) {
  const std::vector<double> a{2, 2}, b{2, 2, 2};
  EXPECT_TRUE(mann_whitney_u(a, b).degenerate);
}
