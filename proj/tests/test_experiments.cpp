#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "incvar/experiments.hpp"

using namespace incvar;

namespace {

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++count;
  return count;
}

ScenarioConfig tiny_contamination_config() {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::contamination_sweep;
  cfg.grid = {0.0, 0.05};
  cfg.n_nominal = 30;
  cfg.n_contam = 30;
  cfg.master_seed = 404;
  cfg.solver.restarts = 2;
  cfg.solver.max_outer_iters = 25;
  return cfg;
}

}  // namespace

TEST(GeneratorTest, NominalShapeAndDeterminism) {
  const auto a = gen_nominal(123, 50, 0.05);
  EXPECT_EQ(a.size(), 50u);
  EXPECT_EQ(a.dim(), 1u);
  const auto b = gen_nominal(123, 50, 0.05);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.xs[i][0], b.xs[i][0]);
    EXPECT_EQ(a.ys[i], b.ys[i]);
  }
  const auto c = gen_nominal(124, 50, 0.05);
  bool any_different = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    any_different = any_different || a.xs[i][0] != c.xs[i][0];
  EXPECT_TRUE(any_different);
}

TEST(GeneratorTest, NominalIsNoiseFreeAtZeroSigma) {
  const auto data = gen_nominal(7, 40, 0.0);
  const auto spec = sweep_model();
  const auto theta = nominal_true_theta();
  for (std::size_t i = 0; i < data.size(); ++i)
    EXPECT_DOUBLE_EQ(data.ys[i], predict(spec, theta, data.xs[i]));
  EXPECT_DOUBLE_EQ(predict(spec, theta, {0.0}), -2.0);
}

TEST(GeneratorTest, ContaminationIsSteepAndWide) {
  EXPECT_DOUBLE_EQ(predict(sweep_model(), contamination_theta(), {0.0}), 100.0);
  const auto data = gen_contamination(9, 200, 0.05);
  EXPECT_EQ(data.size(), 200u);
  double max_abs_x = 0.0;
  for (const auto& x : data.xs) max_abs_x = std::max(max_abs_x, std::abs(x[0]));
  EXPECT_GT(max_abs_x, 50.0);
}

TEST(GeneratorTest, PerturbedAtKOneSitsOnTheShiftedGrid) {
  const auto data = gen_perturbed(1, 33, 1000, 0.0);
  EXPECT_EQ(data.size(), 1000u);
  for (const auto& x : data.xs) {
    const double nearest = 10.0 * std::round(x[0] / 10.0);
    EXPECT_LE(std::abs(x[0] - nearest), 1.0 + 1e-9);
    EXPECT_GE(nearest, -1e-9);
    EXPECT_LE(nearest, 1990.0 + 1e-9);
  }
  // grid cell at the origin carries the base value 1 up to the disk shift
  const auto base = perturbation_base_theta();
  EXPECT_DOUBLE_EQ(predict(sweep_model(), base, {0.0}), 1.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    if (std::abs(data.xs[i][0]) <= 1.0) EXPECT_LE(std::abs(data.ys[i] - 1.0), 1.0 + 1e-9);
}

TEST(GeneratorTest, PerturbedMixesRoughlyOneOverK) {
  const int k = 20;
  const auto data = gen_perturbed(k, 55, 1000, 0.05);
  std::size_t far = 0;
  for (const auto& x : data.xs)
    if (std::abs(x[0]) > 50.0) ++far;
  EXPECT_GE(far, 20u);
  EXPECT_LE(far, 90u);
}

TEST(GeneratorTest, PerturbedValidatesAndReproduces) {
  EXPECT_THROW(gen_perturbed(0, 1), std::domain_error);
  const auto a = gen_perturbed(3, 77, 200, 0.05);
  const auto b = gen_perturbed(3, 77, 200, 0.05);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.xs[i][0], b.xs[i][0]);
    EXPECT_EQ(a.ys[i], b.ys[i]);
  }
}

TEST(CloudTest, DatasetRoundTripAndSubsample) {
  const auto data = gen_nominal(21, 25, 0.05);
  const auto cloud = to_cloud(data);
  ASSERT_EQ(cloud.points.size(), 25u);
  EXPECT_EQ(cloud.dim(), 2u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(cloud.points[i][0], data.xs[i][0]);
    EXPECT_EQ(cloud.points[i][1], data.ys[i]);
  }

  const auto sub = cloud_subsample(data, 10, 5);
  ASSERT_EQ(sub.points.size(), 10u);
  std::set<std::pair<double, double>> originals, seen;
  for (std::size_t i = 0; i < data.size(); ++i)
    originals.insert({data.xs[i][0], data.ys[i]});
  for (const auto& pt : sub.points) {
    EXPECT_TRUE(originals.count({pt[0], pt[1]})) << "subsample invented a point";
    EXPECT_TRUE(seen.insert({pt[0], pt[1]}).second) << "subsample repeated a point";
  }
  const auto sub2 = cloud_subsample(data, 10, 5);
  for (std::size_t i = 0; i < sub.points.size(); ++i)
    EXPECT_EQ(sub.points[i][0], sub2.points[i][0]);

  EXPECT_THROW(cloud_subsample(data, 0, 1), std::domain_error);
  EXPECT_THROW(cloud_subsample(data, 26, 1), std::domain_error);
}

TEST(TbarTest, ClosedFormsAndOracle) {
  EXPECT_DOUBLE_EQ(tbar(ModelSpec::linear(1), {0.0, 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(tbar(ModelSpec::linear(1), {0.0, 0.0}), -12.0);

  // f(x) = x summed independently in reverse grid order
  double acc = 0.0;
  for (int i = 1999; i >= 0; --i) {
    const double x = -100.0 + 0.1 * i;
    acc += std::log10(std::max(std::abs(x), 1e-12));
  }
  EXPECT_NEAR(tbar(ModelSpec::linear(1), {1.0, 0.0}), acc / 2000.0, 1e-10);
}

TEST(ScenarioConfigTest, ValidatesGridsPerScenario) {
  ScenarioConfig cfg = tiny_contamination_config();
  EXPECT_NO_THROW(cfg.validate());

  auto bad = cfg;
  bad.grid = {};
  EXPECT_THROW(bad.validate(), std::domain_error);
  bad = cfg;
  bad.grid = {0.05, 0.05};
  EXPECT_THROW(bad.validate(), std::domain_error);
  bad = cfg;
  bad.grid = {0.0, 1.0};  // eps = 1 leaves no nominal mass
  EXPECT_THROW(bad.validate(), std::domain_error);
  bad = cfg;
  bad.n_nominal = 0;
  EXPECT_THROW(bad.validate(), std::domain_error);
  bad = cfg;
  bad.gamma_cvar = 1.0;
  EXPECT_THROW(bad.validate(), std::domain_error);
  bad = cfg;
  bad.noise_sigma = -0.1;
  EXPECT_THROW(bad.validate(), std::domain_error);
  bad = cfg;
  bad.solver.restarts = 0;
  EXPECT_THROW(bad.validate(), std::domain_error);

  ScenarioConfig beta;
  beta.scenario = Scenario::level_sweep_beta;
  beta.levels = TrimLevels{0.05, 0.95};
  beta.grid = {0.5, 0.9};
  EXPECT_NO_THROW(beta.validate());
  beta.grid = {0.01, 0.9};  // below alpha
  EXPECT_THROW(beta.validate(), std::domain_error);

  ScenarioConfig alpha;
  alpha.scenario = Scenario::level_sweep_alpha;
  alpha.levels = TrimLevels{0.05, 0.95};
  alpha.grid = {0.0, 0.5};
  EXPECT_NO_THROW(alpha.validate());
  alpha.grid = {0.0, 0.95};  // reaches beta
  EXPECT_THROW(alpha.validate(), std::domain_error);

  ScenarioConfig pert;
  pert.scenario = Scenario::perturbation_sweep;
  pert.grid = {1.0, 2.0, 5.0};
  EXPECT_NO_THROW(pert.validate());
  pert.grid = {1.0, 2.5};
  EXPECT_THROW(pert.validate(), std::domain_error);
  pert.grid = {0.0, 2.0};
  EXPECT_THROW(pert.validate(), std::domain_error);
}

TEST(RunSweepTest, RowLayoutAndContent) {
  const auto cfg = tiny_contamination_config();
  const auto result = run_sweep(cfg);
  ASSERT_EQ(result.rows.size(), 6u);
  EXPECT_EQ(result.version, kVersion);

  const std::vector<std::string> order = {"incvar", "expectation", "cvar"};
  const double expected_true = tbar(sweep_model(), nominal_true_theta());
  for (std::size_t gi = 0; gi < 2; ++gi) {
    for (std::size_t e = 0; e < 3; ++e) {
      const auto& row = result.rows[gi * 3 + e];
      EXPECT_EQ(row.grid_value, cfg.grid[gi]);
      EXPECT_EQ(row.estimator, order[e]);
      EXPECT_DOUBLE_EQ(row.tbar_true, expected_true);
      EXPECT_FALSE(row.failed);
      EXPECT_GE(row.objective, 0.0);
      EXPECT_TRUE(std::isfinite(row.tbar));
      EXPECT_EQ(row.seconds, 0.0);
    }
  }
}

TEST(RunSweepTest, CsvIsByteStableAcrossRunsAndJobCounts) {
  const auto cfg = tiny_contamination_config();
  std::ostringstream s1, s2, s3;
  emit_csv(run_sweep(cfg, 1), s1);
  emit_csv(run_sweep(cfg, 1), s2);
  emit_csv(run_sweep(cfg, 2), s3);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_EQ(s1.str(), s3.str());

  std::istringstream lines(s1.str());
  std::string line;
  ASSERT_TRUE(std::getline(lines, line));
  EXPECT_EQ(line,
            "scenario,grid_param,grid_value,estimator,tbar,tbar_true,objective,"
            "seconds,failed");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    EXPECT_EQ(line.rfind("contamination_sweep,eps,", 0), 0u) << line;
    EXPECT_EQ(line.back(), '0');  // no failures in this sweep
    ++rows;
  }
  EXPECT_EQ(rows, 6u);
}

TEST(RunSweepTest, SvgHasOnePolylinePerEstimator) {
  const auto cfg = tiny_contamination_config();
  const auto result = run_sweep(cfg);
  std::ostringstream svg;
  emit_svg(result, svg);
  const std::string body = svg.str();
  EXPECT_EQ(body.rfind("<svg", 0), 0u);
  EXPECT_EQ(count_occurrences(body, "<polyline"), 3u);
  EXPECT_EQ(count_occurrences(body, "stroke-dasharray"), 1u);
  EXPECT_NE(body.find("incvar"), std::string::npos);
  EXPECT_NE(body.find("expectation"), std::string::npos);
  EXPECT_NE(body.find("cvar"), std::string::npos);
  EXPECT_NE(body.find("</svg>"), std::string::npos);

  std::ostringstream again;
  emit_svg(run_sweep(cfg), again);
  EXPECT_EQ(body, again.str());
}

TEST(RunSweepTest, LevelSweepUsesGridAsTrimLevel) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::level_sweep_beta;
  cfg.levels = TrimLevels{0.05, 0.95};
  cfg.grid = {0.6, 0.9};
  cfg.n_nominal = 25;
  cfg.n_contam = 25;
  cfg.contamination_eps = 0.04;
  cfg.master_seed = 11;
  cfg.solver.restarts = 2;
  cfg.solver.max_outer_iters = 20;
  const auto result = run_sweep(cfg);
  ASSERT_EQ(result.rows.size(), 6u);
  // expectation and cvar baselines ignore the swept level, so their fits
  // agree across the grid while the dataset is held fixed per grid index
  std::ostringstream csv;
  emit_csv(result, csv);
  EXPECT_NE(csv.str().find("level_sweep_beta,beta,"), std::string::npos);
}
