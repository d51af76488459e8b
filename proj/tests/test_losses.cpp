#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "incvar/losses.hpp"
#include "incvar/rng.hpp"

using namespace incvar;

TEST(LossSpecTest, FactoriesAndValidation) {
  EXPECT_EQ(LossSpec::absolute().kind, LossKind::absolute);
  EXPECT_EQ(LossSpec::squared().kind, LossKind::squared);
  EXPECT_EQ(LossSpec::huber(2.0).delta, 2.0);
  EXPECT_THROW(LossSpec::huber(0.0), std::domain_error);
  EXPECT_THROW(LossSpec::huber(-1.0), std::domain_error);
}

TEST(EvalLossTest, BaseValues) {
  EXPECT_DOUBLE_EQ(eval_loss(LossSpec::absolute(), 3.0), 3.0);
  EXPECT_DOUBLE_EQ(eval_loss(LossSpec::squared(), 3.0), 9.0);
  EXPECT_DOUBLE_EQ(eval_loss(LossSpec::huber(1.0), 0.5), 0.125);
  EXPECT_DOUBLE_EQ(eval_loss(LossSpec::huber(1.0), 2.0), 1.5);
  for (const auto& spec :
       {LossSpec::absolute(), LossSpec::squared(), LossSpec::huber(0.7)}) {
    EXPECT_DOUBLE_EQ(eval_loss(spec, 0.0), 0.0);
  }
}

TEST(EvalLossTest, RejectsBadArguments) {
  EXPECT_THROW(eval_loss(LossSpec::absolute(), -1.0), std::domain_error);
  EXPECT_THROW(eval_loss(LossSpec::squared(),
                         std::numeric_limits<double>::quiet_NaN()),
               std::domain_error);
  EXPECT_THROW(eval_loss(LossSpec::huber(1.0),
                         std::numeric_limits<double>::infinity()),
               std::domain_error);
}

TEST(EvalLossTest, NondecreasingOnRandomPairs) {
  Rng rng(31);
  const std::vector<LossSpec> specs = {LossSpec::absolute(), LossSpec::squared(),
                                       LossSpec::huber(0.3), LossSpec::huber(4.0)};
  for (const auto& spec : specs) {
    for (int rep = 0; rep < 300; ++rep) {
      double s = 10.0 * rng.uniform();
      double t = 10.0 * rng.uniform();
      if (s > t) std::swap(s, t);
      EXPECT_LE(eval_loss(spec, s), eval_loss(spec, t) + 1e-15);
    }
  }
}

TEST(EvalLossTest, DivergesAlongDoublingLadder) {
  for (const auto& spec :
       {LossSpec::absolute(), LossSpec::squared(), LossSpec::huber(0.5)}) {
    double prev = eval_loss(spec, 1.0);
    double t = 2.0;
    for (int step = 0; step < 24; ++step, t *= 2.0) {
      const double cur = eval_loss(spec, t);
      EXPECT_GT(cur, prev);
      prev = cur;
    }
    EXPECT_GT(prev, 1e6);
  }
}

TEST(EvalLossTest, MidpointConvexity) {
  Rng rng(32);
  for (const auto& spec :
       {LossSpec::absolute(), LossSpec::squared(), LossSpec::huber(1.3)}) {
    for (int rep = 0; rep < 300; ++rep) {
      const double s = 8.0 * rng.uniform();
      const double t = 8.0 * rng.uniform();
      const double mid = eval_loss(spec, 0.5 * (s + t));
      const double avg = 0.5 * (eval_loss(spec, s) + eval_loss(spec, t));
      EXPECT_LE(mid, avg + 1e-12);
    }
  }
}

TEST(LossSlopeTest, HuberIsSmoothAtTheKnee) {
  const double delta = 1.7;
  const auto spec = LossSpec::huber(delta);
  const double h = 1e-6;
  const double left = (eval_loss(spec, delta) - eval_loss(spec, delta - h)) / h;
  const double right = (eval_loss(spec, delta + h) - eval_loss(spec, delta)) / h;
  EXPECT_NEAR(left, right, 1e-5);
  EXPECT_NEAR(loss_slope(spec, delta), delta, 1e-12);
  EXPECT_DOUBLE_EQ(loss_slope(spec, 2.0 * delta), delta);
  EXPECT_DOUBLE_EQ(loss_slope(spec, 0.5 * delta), 0.5 * delta);
}

TEST(LossSlopeTest, MatchesFiniteDifferences) {
  Rng rng(33);
  const std::vector<LossSpec> specs = {LossSpec::squared(), LossSpec::huber(0.9)};
  for (const auto& spec : specs) {
    for (int rep = 0; rep < 100; ++rep) {
      const double t = 0.05 + 6.0 * rng.uniform();
      const double h = 1e-7 * std::max(1.0, t);
      const double fd = (eval_loss(spec, t + h) - eval_loss(spec, t - h)) / (2 * h);
      EXPECT_NEAR(loss_slope(spec, t), fd, 1e-5);
    }
  }
}

TEST(GrowthCheckTest, SquaredSatisfiesPowerGrowth) {
  const auto report = check_c1_growth(LossSpec::squared(), 2.0, 1.0, 4000, 101);
  EXPECT_TRUE(report.satisfied);
  EXPECT_EQ(report.violations, 0);
  EXPECT_LE(report.max_margin, 1e-12);
}

TEST(GrowthCheckTest, AbsoluteFailsQuadraticGrowth) {
  const auto report = check_c1_growth(LossSpec::absolute(), 2.0, 1.0, 4000, 102);
  EXPECT_FALSE(report.satisfied);
  EXPECT_GT(report.violations, 0);
  EXPECT_TRUE(std::isfinite(report.witness_s));
  EXPECT_TRUE(std::isfinite(report.witness_t));
  // the recorded witness really does break the inequality
  const double lhs = eval_loss(LossSpec::absolute(),
                               report.witness_s * report.witness_t);
  const double rhs = std::pow(report.witness_s, 2.0) *
                     eval_loss(LossSpec::absolute(), report.witness_t);
  EXPECT_GT(lhs, rhs);
}

TEST(GrowthCheckTest, HuberFailsQuadraticGrowthPastTheKnee) {
  const auto report = check_c1_growth(LossSpec::huber(1.0), 2.0, 10.0, 4000, 103);
  EXPECT_FALSE(report.satisfied);
  EXPECT_GT(report.violations, 0);
}

TEST(GrowthCheckTest, RejectsBadParameters) {
  EXPECT_THROW(check_c1_growth(LossSpec::squared(), 1.0, 1.0, 100, 1),
               std::domain_error);
  EXPECT_THROW(check_c1_growth(LossSpec::squared(), 2.0, 0.0, 100, 1),
               std::domain_error);
}

namespace {

// t rising to 1e6 while s falls so that s*t stays at or below one
const std::vector<double> kRisingT = {10, 1e2, 1e3, 1e4, 1e5, 1e6};
const std::vector<double> kFallingS = {5e-2, 5e-3, 5e-4, 5e-5, 5e-6};

}  // namespace

TEST(VanishingRatioTest, AbsoluteLossRatioDropsWithScale) {
  const auto report = check_c2_vanishing(LossSpec::absolute(), kRisingT, kFallingS);
  EXPECT_TRUE(report.pass);
  EXPECT_LE(report.tail_ratio, 1e-5);
  // the absolute loss makes the ratio equal to s exactly
  for (const auto& entry : report.table)
    EXPECT_NEAR(entry.ratio, entry.s, 1e-12 * entry.s);
}

TEST(VanishingRatioTest, SquaredLossRatioIsScaleSquared) {
  const auto report = check_c2_vanishing(LossSpec::squared(), kRisingT, kFallingS);
  EXPECT_TRUE(report.pass);
  for (const auto& entry : report.table)
    EXPECT_NEAR(entry.ratio, entry.s * entry.s, 1e-10 * entry.s * entry.s);
}

TEST(VanishingRatioTest, HuberRatioVanishesUnderBoundedProduct) {
  const auto report = check_c2_vanishing(LossSpec::huber(1.0), kRisingT, kFallingS);
  EXPECT_TRUE(report.pass);
  EXPECT_LT(report.tail_ratio, 1e-3);
  EXPECT_GT(report.tail_t, 1e4);
}

TEST(VanishingRatioTest, RejectsBadGrids) {
  EXPECT_THROW(check_c2_vanishing(LossSpec::absolute(), {}, {0.5}),
               std::domain_error);
  EXPECT_THROW(check_c2_vanishing(LossSpec::absolute(), {1.0, 0.5}, {0.5}),
               std::domain_error);
  EXPECT_THROW(check_c2_vanishing(LossSpec::absolute(), {1.0, 2.0}, {0.1, 0.5}),
               std::domain_error);
}
