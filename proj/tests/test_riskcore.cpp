#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "incvar/riskcore.hpp"
#include "incvar/rng.hpp"
#include "oracles.hpp"

using namespace incvar;

namespace {

WeightedLossSample random_law(Rng& rng, std::size_t n, double scale = 1.0) {
  Vec values(n), weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = scale * rng.uniform();
    weights[i] = 0.05 + rng.uniform();
  }
  const double total = kahan_sum(weights);
  for (double& w : weights) w /= total;
  return WeightedLossSample(std::move(values), std::move(weights));
}

}  // namespace

TEST(TrimLevelsTest, RejectsBadRanges) {
  EXPECT_NO_THROW(TrimLevels(0.0, 1.0));
  EXPECT_NO_THROW(TrimLevels(0.05, 0.95));
  EXPECT_THROW(TrimLevels(0.5, 0.5), std::domain_error);
  EXPECT_THROW(TrimLevels(0.9, 0.1), std::domain_error);
  EXPECT_THROW(TrimLevels(-0.1, 0.5), std::domain_error);
  EXPECT_THROW(TrimLevels(0.1, 1.1), std::domain_error);
}

TEST(WeightedLossSampleTest, ValidatesInputs) {
  EXPECT_THROW(WeightedLossSample({}, {}), std::domain_error);
  EXPECT_THROW(WeightedLossSample({1.0, 2.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(WeightedLossSample({-1.0}, {1.0}), std::domain_error);
  EXPECT_THROW(WeightedLossSample({1.0}, {0.0}), std::domain_error);
  EXPECT_THROW(WeightedLossSample({1.0, 2.0}, {0.8, 0.1}), std::domain_error);
}

TEST(WeightedLossSampleTest, RenormalizesTinyDrift) {
  const double drift = 1e-10;
  WeightedLossSample law({1.0, 2.0}, {0.5 + drift, 0.5});
  EXPECT_NEAR(law.weights()[0] + law.weights()[1], 1.0, 1e-15);
}

TEST(VarTest, QuantilesOfSmallLaw) {
  const auto law = WeightedLossSample::uniform({1, 2, 3, 4, 5});
  EXPECT_DOUBLE_EQ(var_at(law, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(var_at(law, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(var_at(law, 1.0), 5.0);
  // at a cumulative boundary the lower block wins
  EXPECT_DOUBLE_EQ(var_at(law, 0.2), 1.0);
  EXPECT_DOUBLE_EQ(var_at(law, 0.2 + 1e-9), 2.0);
  EXPECT_THROW(var_at(law, -0.1), std::domain_error);
  EXPECT_THROW(var_at(law, 1.1), std::domain_error);
}

TEST(VarTest, UnsortedInputHandled) {
  const auto law = WeightedLossSample::uniform({10, 0, 5});
  EXPECT_DOUBLE_EQ(var_at(law, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(var_at(law, 0.5), 5.0);
  EXPECT_DOUBLE_EQ(var_at(law, 1.0), 10.0);
}

TEST(CvarTest, TailAveragesOfSmallLaw) {
  const auto law = WeightedLossSample::uniform({1, 2, 3, 4, 5});
  EXPECT_NEAR(cvar_at(law, 0.0), 3.0, 1e-12);     // full-range average
  EXPECT_NEAR(cvar_at(law, 0.8), 5.0, 1e-12);     // top atom only
  EXPECT_THROW(cvar_at(law, 1.0), std::domain_error);
}

TEST(CvarTest, ConstantLawIsItsOwnTailAverage) {
  const auto law = WeightedLossSample::uniform({7.25});
  EXPECT_DOUBLE_EQ(cvar_at(law, 0.3), 7.25);
}

TEST(CvarTest, NondecreasingInLevel) {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto law = random_law(rng, 13);
    double prev = cvar_at(law, 0.0);
    for (double gamma = 0.05; gamma < 1.0; gamma += 0.05) {
      const double cur = cvar_at(law, gamma);
      EXPECT_GE(cur, prev - 1e-12);
      prev = cur;
    }
  }
}

TEST(InCvarTest, WindowAveragesOfSmallLaws) {
  const auto law = WeightedLossSample::uniform({1, 2, 3, 4, 5});
  EXPECT_NEAR(in_cvar(law, {0.2, 0.8}), 3.0, 1e-12);
  const auto law2 = WeightedLossSample::uniform({10, 0, 5});
  EXPECT_NEAR(in_cvar(law2, {0.0, 0.5}), 5.0 / 3.0, 1e-12);
}

TEST(InCvarTest, FullWindowIsWeightedMean) {
  Rng rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    const auto law = random_law(rng, 17);
    double mean = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i)
      mean += law.values()[i] * law.weights()[i];
    EXPECT_NEAR(in_cvar(law, {0.0, 1.0}), mean, 1e-12);
  }
}

TEST(InCvarTest, MatchesQuantileGridOracle) {
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    const auto law = random_law(rng, 5 + static_cast<std::size_t>(rng.below(46)));
    const double a = 0.9 * rng.uniform();
    const double b = a + (1.0 - a) * (0.1 + 0.9 * rng.uniform());
    const double exact = in_cvar(law, {a, b});
    const double grid = oracles::grid_incvar(law, a, b);
    EXPECT_NEAR(exact, grid, 1e-6);
  }
}

TEST(InCvarTest, CvarWindowDecomposition) {
  Rng rng(14);
  for (int rep = 0; rep < 200; ++rep) {
    const auto law = random_law(rng, 3 + static_cast<std::size_t>(rng.below(30)));
    const double a = 0.95 * rng.uniform();
    const double b = a + (0.999 - a) * (0.01 + 0.99 * rng.uniform());
    const double lhs = (b - a) * in_cvar(law, {a, b});
    const double rhs = (1.0 - a) * cvar_at(law, a) - (1.0 - b) * cvar_at(law, b);
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(InCvarTest, ShiftAndScaleEquivariance) {
  Rng rng(15);
  const TrimLevels levels{0.15, 0.85};
  for (int rep = 0; rep < 50; ++rep) {
    const auto law = random_law(rng, 9);
    const double base = in_cvar(law, levels);
    const double c = 3.0 * rng.uniform();
    const double lambda = 2.0 * rng.uniform();
    Vec shifted = law.values();
    Vec scaled = law.values();
    for (double& v : shifted) v += c;
    for (double& v : scaled) v *= lambda;
    const WeightedLossSample law_shift(shifted, law.weights());
    const WeightedLossSample law_scale(scaled, law.weights());
    EXPECT_NEAR(in_cvar(law_shift, levels), base + c, 1e-10);
    EXPECT_NEAR(in_cvar(law_scale, levels), lambda * base, 1e-10);
  }
}

TEST(InCvarTest, BoundedByValueRange) {
  Rng rng(16);
  for (int rep = 0; rep < 50; ++rep) {
    const auto law = random_law(rng, 11);
    const double lo = *std::min_element(law.values().begin(), law.values().end());
    const double hi = *std::max_element(law.values().begin(), law.values().end());
    const double v = in_cvar(law, {0.3, 0.7});
    EXPECT_GE(v, lo - 1e-12);
    EXPECT_LE(v, hi + 1e-12);
  }
}

TEST(InCvarTest, PermutationInvariant) {
  Rng rng(17);
  const auto law = random_law(rng, 10);
  std::vector<std::size_t> idx(law.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (int rep = 0; rep < 20; ++rep) {
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.below(i)]);
    Vec pv(law.size()), pw(law.size());
    for (std::size_t i = 0; i < law.size(); ++i) {
      pv[i] = law.values()[idx[i]];
      pw[i] = law.weights()[idx[i]];
    }
    const WeightedLossSample perm(pv, pw);
    EXPECT_DOUBLE_EQ(var_at(perm, 0.4), var_at(law, 0.4));
    EXPECT_NEAR(cvar_at(perm, 0.25), cvar_at(law, 0.25), 1e-12);
    EXPECT_NEAR(in_cvar(perm, {0.1, 0.9}), in_cvar(law, {0.1, 0.9}), 1e-12);
  }
}

TEST(InCvarTest, SmallValueJitterMovesResultLittle) {
  Rng rng(18);
  const auto law = random_law(rng, 25, 10.0);
  const TrimLevels levels{0.1, 0.9};
  const double base = in_cvar(law, levels);
  for (double jitter = 0.1; jitter > 1e-7; jitter *= 0.1) {
    Vec v = law.values();
    for (double& x : v) x += jitter * rng.uniform();
    const WeightedLossSample moved(v, law.weights());
    EXPECT_LE(std::abs(in_cvar(moved, levels) - base), jitter + 1e-12);
  }
}

TEST(MixtureTest, EndpointAndBlendWeights) {
  const auto d0 = WeightedLossSample::uniform({0.0});
  const auto g = WeightedLossSample::uniform({1.0});

  const auto pure0 = mixture(d0, g, 0.0);
  ASSERT_EQ(pure0.size(), 1u);
  EXPECT_DOUBLE_EQ(pure0.values()[0], 0.0);

  const auto pure1 = mixture(d0, g, 1.0);
  ASSERT_EQ(pure1.size(), 1u);
  EXPECT_DOUBLE_EQ(pure1.values()[0], 1.0);

  const auto blend = mixture(d0, g, 0.25);
  ASSERT_EQ(blend.size(), 2u);
  EXPECT_DOUBLE_EQ(blend.values()[0], 0.0);
  EXPECT_DOUBLE_EQ(blend.weights()[0], 0.75);
  EXPECT_DOUBLE_EQ(blend.values()[1], 1.0);
  EXPECT_DOUBLE_EQ(blend.weights()[1], 0.25);

  EXPECT_THROW(mixture(d0, g, -0.1), std::domain_error);
  EXPECT_THROW(mixture(d0, g, 1.5), std::domain_error);
}

TEST(MixtureTest, KeepsCoincidentAtomsSeparate) {
  const auto d0 = WeightedLossSample::uniform({2.0, 2.0});
  const auto g = WeightedLossSample::uniform({2.0});
  const auto mix = mixture(d0, g, 0.5);
  EXPECT_EQ(mix.size(), 3u);
  EXPECT_NEAR(in_cvar(mix, {0.0, 1.0}), 2.0, 1e-12);
}

TEST(CertifyMixtureBoundsTest, SelfMixturePassesEverywhere) {
  Rng rng(19);
  for (int rep = 0; rep < 30; ++rep) {
    const auto law = random_law(rng, 15);
    for (double eps : {0.01, 0.1, 0.4, 0.7, 0.95}) {
      const auto rep_out = certify_lemma1(law, law, eps, {0.05, 0.95});
      EXPECT_TRUE(rep_out.all_applicable_pass()) << "eps=" << eps;
    }
  }
}

TEST(CertifyMixtureBoundsTest, SmallContaminationUpperBoundAlwaysApplies) {
  Rng rng(20);
  for (int rep = 0; rep < 500; ++rep) {
    const auto d0 = random_law(rng, 20);
    const auto g = random_law(rng, 20, 50.0);
    const auto out = certify_lemma1(d0, g, 0.02, {0.05, 0.95});
    ASSERT_TRUE(out.upper_rescaled.applicable);
    EXPECT_TRUE(out.upper_rescaled.pass);
    EXPECT_TRUE(out.all_applicable_pass());
  }
}

TEST(CertifyMixtureBoundsTest, HugeContaminantForcesLowerBound) {
  const auto d0 = WeightedLossSample::uniform({0.1, 0.2, 0.3, 0.4});
  const auto g = WeightedLossSample::uniform({1e6});
  // within the lower-bound regime: eps must exceed the discarded upper mass
  const auto out = certify_lemma1(d0, g, 0.25, {0.1, 0.8});
  ASSERT_TRUE(out.lower_tail.applicable);
  EXPECT_GT(out.lower_tail.rhs, 0.0);
  EXPECT_TRUE(out.lower_tail.pass);

  // below that regime the clause reports not-applicable rather than failed
  const auto below = certify_lemma1(d0, g, 0.1, {0.1, 0.8});
  EXPECT_FALSE(below.lower_tail.applicable);
  EXPECT_TRUE(below.lower_tail.note.find("eps") != std::string::npos);
  EXPECT_TRUE(below.all_applicable_pass());
}

TEST(CertifyMixtureBoundsTest, RegimeGatesMatchEpsilon) {
  const auto d0 = WeightedLossSample::uniform({1, 2, 3, 4});
  const auto g = WeightedLossSample::uniform({10, 20});
  const TrimLevels levels{0.1, 0.8};

  const auto small = certify_lemma1(d0, g, 0.15, levels);   // eps <= 1-beta
  EXPECT_TRUE(small.upper_rescaled.applicable);
  EXPECT_FALSE(small.lower_tail.applicable);

  const auto mid = certify_lemma1(d0, g, 0.5, levels);      // 1-beta < eps <= 1-alpha
  EXPECT_FALSE(mid.upper_rescaled.applicable);
  EXPECT_TRUE(mid.lower_tail.applicable);

  const auto large = certify_lemma1(d0, g, 0.95, levels);   // eps > 1-alpha, eps > beta
  EXPECT_FALSE(large.upper_rescaled.applicable);
  EXPECT_FALSE(large.upper_quantile.applicable);
  EXPECT_FALSE(large.lower_tail.applicable);
}

TEST(CertifyMixtureBoundsTest, QuantileClauseReportsChosenLevel) {
  Rng rng(21);
  int applicable_seen = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto d0 = random_law(rng, 12);
    const auto g = random_law(rng, 8);
    const double eps = 0.05 + 0.5 * rng.uniform();
    const auto out = certify_lemma1(d0, g, eps, {0.05, 0.9});
    if (!out.upper_quantile.applicable) continue;
    ++applicable_seen;
    EXPECT_TRUE(out.upper_quantile.pass);
    EXPECT_GE(out.eta, -1e-12);
    EXPECT_LE(out.eta, 1.0 + 1e-12);
    EXPECT_GE(out.quantile_level, 0.0);
    EXPECT_LE(out.quantile_level, 1.0);
    if (out.level_at_atom_boundary) {
      EXPECT_TRUE(std::isfinite(out.quantile_upper_alt));
      EXPECT_GE(out.quantile_upper_alt, out.upper_quantile.rhs);
    }
  }
  EXPECT_GT(applicable_seen, 50);
}

TEST(CertifyMixtureBoundsTest, RejectsBadEpsilon) {
  const auto law = WeightedLossSample::uniform({1.0, 2.0});
  EXPECT_THROW(certify_lemma1(law, law, -0.1, {0.1, 0.9}), std::domain_error);
  EXPECT_THROW(certify_lemma1(law, law, 1.2, {0.1, 0.9}), std::domain_error);
}
