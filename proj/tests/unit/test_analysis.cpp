#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sentlabel/analysis.hpp"
#include "sentlabel/factorization.hpp"

using namespace sentlabel;

TEST(RowLoss, ExactApproximationGivesZero) {
  const auto g = generate(30, 40, profiles::uniform(0.2), RngSeed{1});
  const auto report = row_l1_loss(g.matrix, densify(g.matrix));
  for (double l : report.per_row_l1) EXPECT_EQ(l, 0.0);
}

TEST(RowLoss, ZeroApproximationCountsOnes) {
  const auto g = generate(30, 40, profiles::uniform(0.2), RngSeed{2});
  const auto report = row_l1_loss(g.matrix, Eigen::MatrixXd::Zero(30, 40));
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(report.per_row_l1[i], static_cast<double>(g.matrix.row(i).size()));
}

TEST(RowLoss, MatchesBruteForceSum) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = generate(5, 7, profiles::uniform(0.4), RngSeed{seed});
    const auto approx = reconstruct(svd_truncated(g.matrix, 2, SvdMethod::Exact));
    const auto report = row_l1_loss(g.matrix, approx);
    const auto want = oracle::row_l1(g.matrix, approx);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(report.per_row_l1[i], want[i], 1e-12);
  }
}

TEST(RowLoss, BoundedAndNonNegative) {
  const auto g = generate(80, 90, profiles::table1_even(), RngSeed{3});
  const auto approx = reconstruct(svd_truncated(g.matrix, 5, SvdMethod::Exact));
  const double bound = 90 * std::max(1.0, approx.cwiseAbs().maxCoeff());
  for (double l : row_l1_loss(g.matrix, approx).per_row_l1) {
    EXPECT_TRUE(std::isfinite(l));
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, bound);
  }
}

TEST(RowLoss, DimensionMismatch) {
  const LabelMatrix m(4, 3);
  EXPECT_THROW(row_l1_loss(m, Eigen::MatrixXd::Zero(4, 4)), std::invalid_argument);
  EXPECT_THROW(row_l1_loss(m, Eigen::MatrixXd::Zero(4, 3), {0, 0}), std::invalid_argument);
}

TEST(GroupStats, ZeroLossSingleGroup) {
  RowLossReport report{{0.0, 0.0, 0.0}, {0, 0, 0}};
  const auto stats = group_stats(report, profiles::uniform(0.5));
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_EQ(stats[0].mean_loss, 0.0);
  EXPECT_EQ(stats[0].std_loss, 0.0);
  EXPECT_EQ(stats[0].n_rows, 3u);
}

TEST(GroupStats, PopulationStd) {
  RowLossReport report{{1.0, 3.0, 10.0, 2.0, 4.0, 6.0}, {0, 0, 1, 1, 1, 1}};
  const auto stats = group_stats(report, profiles::parse("0.1:0.5,0.2:0.5"));
  EXPECT_DOUBLE_EQ(stats[0].mean_loss, 2.0);
  EXPECT_DOUBLE_EQ(stats[0].std_loss, 1.0);
  EXPECT_DOUBLE_EQ(stats[1].mean_loss, 5.5);
  EXPECT_DOUBLE_EQ(stats[1].std_loss, std::sqrt((20.25 + 12.25 + 2.25 + 0.25) / 4));
  EXPECT_EQ(stats[1].density, 0.2);
}

TEST(GroupStats, EmptyGroupIsAnError) {
  RowLossReport report{{1.0, 2.0}, {0, 0}};
  EXPECT_THROW(group_stats(report, profiles::parse("0.1:0.5,0.2:0.5")), std::invalid_argument);
  RowLossReport bad{{1.0}, {3}};
  EXPECT_THROW(group_stats(bad, profiles::uniform(0.1)), std::invalid_argument);
}
