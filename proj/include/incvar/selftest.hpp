#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "experiments.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "riskcore.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace incvar {

struct SelfTestResult {
  int passed = 0;
  int failed = 0;
  std::vector<std::string> failures;
  bool ok() const { return failed == 0; }
};

namespace detail {

struct SelfCheck {
  const char* name;
  std::function<void()> body;
};

inline void expect(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

inline void expect_near(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol))
    throw std::runtime_error(what + ": got " + format_g17(got) + ", want " +
                             format_g17(want));
}

inline WeightedLossSample random_law(Rng& rng, std::size_t n, double shift = 0.0) {
  Vec values(n), weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = shift + 10.0 * rng.uniform();
    weights[i] = 0.1 + rng.uniform();
  }
  const double total = kahan_sum(weights);
  for (double& w : weights) w /= total;
  return WeightedLossSample(std::move(values), std::move(weights));
}

}  // namespace detail

/// Quick in-process battery over every module; one line per check.  Meant as
/// an installed-binary sanity probe, not a replacement for the unit suite.
inline SelfTestResult run_selftest(std::ostream& log) {
  using detail::expect;
  using detail::expect_near;

  std::vector<detail::SelfCheck> checks;

  checks.push_back({"risk measures on small laws", [] {
    const auto law = WeightedLossSample::uniform({1, 2, 3, 4, 5});
    expect_near(var_at(law, 0.5), 3.0, 0.0, "median of 1..5");
    expect_near(cvar_at(law, 0.6), 4.5, 1e-12, "upper-tail mean of 1..5");
    expect_near(in_cvar(law, {0.2, 0.8}), 3.0, 1e-12, "trimmed mean of 1..5");
  }});

  checks.push_back({"trim window decomposition identity", [] {
    Rng rng(41);
    for (int rep = 0; rep < 100; ++rep) {
      const auto law = detail::random_law(rng, 12);
      const double a = 0.9 * rng.uniform();
      const double b = a + (0.999 - a) * (0.05 + 0.95 * rng.uniform());
      const double lhs = (b - a) * in_cvar(law, {a, b});
      const double rhs = (1 - a) * cvar_at(law, a) - (1 - b) * cvar_at(law, b);
      expect(std::abs(lhs - rhs) <= 1e-10, "window identity violated");
    }
  }});

  checks.push_back({"mixture bound certificates", [] {
    Rng rng(42);
    for (int rep = 0; rep < 25; ++rep) {
      const auto d0 = detail::random_law(rng, 10);
      const auto g = detail::random_law(rng, 8, 5.0);
      const auto report = certify_lemma1(d0, g, 0.04 + 0.9 * rng.uniform(), {0.1, 0.9});
      expect(report.all_applicable_pass(), "applicable mixture bound failed");
    }
  }});

  checks.push_back({"loss curvature and growth", [] {
    const auto huber = LossSpec::huber(1.0);
    expect_near(eval_loss(huber, 0.5), 0.125, 1e-15, "huber below knee");
    expect_near(eval_loss(huber, 2.0), 1.5, 1e-15, "huber above knee");
    const auto report = check_c1_growth(LossSpec::squared(), 2.0, 10.0, 200, 7);
    expect(report.satisfied, "squared loss growth bound");
  }});

  checks.push_back({"model evaluation and layout", [] {
    const auto spec = sweep_model();
    expect(param_count(spec) == 8, "piecewise parameter count");
    const auto theta = nominal_true_theta();
    expect_near(predict(spec, theta, {0.0}), -2.0, 1e-12, "nominal value at zero");
  }});

  checks.push_back({"network reparameterization identity", [] {
    const auto spec = ModelSpec::feedforward(2, {4, 3, 1}, Activation::relu);
    Rng rng(43);
    const ParamVector theta = rng.gaussian(param_count(spec));
    const ParamVector warped = nn_reparam(spec, theta);
    for (int rep = 0; rep < 20; ++rep) {
      const Vec x = rng.gaussian(2);
      expect_near(reparam_predict(spec, warped, x), predict(spec, theta, x), 1e-9,
                  "warped forward mismatch");
    }
    ParamVector scaled = warped;
    for (auto& c : scaled) c *= 1.7;
    for (int rep = 0; rep < 20; ++rep) {
      const Vec x = rng.gaussian(2);
      expect_near(reparam_predict(spec, scaled, x), 1.7 * reparam_predict(spec, warped, x),
                  1e-9 * (1.0 + std::abs(reparam_predict(spec, warped, x))),
                  "warped scaling mismatch");
    }
  }});

  checks.push_back({"least-squares fit recovery", [] {
    Rng rng(44);
    std::vector<Vec> xs;
    Vec ys;
    for (int i = 0; i < 30; ++i) {
      const double x = rng.uniform(-2.0, 2.0);
      xs.push_back({x});
      ys.push_back(1.5 * x - 0.7 + 0.01 * rng.normal());
    }
    const auto data = DataSet::uniform(xs, ys);
    SolveConfig cfg;
    cfg.restarts = 5;
    cfg.max_outer_iters = 60;
    cfg.seed = 9;
    const auto report =
        fit_incvar(data, ModelSpec::linear(1), LossSpec::squared(), {0.0, 1.0}, cfg);
    double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double w = data.weights[i], x = data.xs[i][0], y = data.ys[i];
      sw += w; swx += w * x; swxx += w * x * x; swy += w * y; swxy += w * x * y;
    }
    const double det = swxx * sw - swx * swx;
    const double slope = (swxy * sw - swx * swy) / det;
    const double intercept = (swxx * swy - swx * swxy) / det;
    expect_near(report.best_theta[0], slope, 1e-5, "fitted slope");
    expect_near(report.best_theta[1], intercept, 1e-5, "fitted intercept");
  }});

  checks.push_back({"distribution distances", [] {
    EmpiricalCloud a{{{0.0, 0.0}}};
    EmpiricalCloud b{{{0.3, 0.0}}};
    EmpiricalCloud c{{{2.0, 0.0}}};
    expect_near(prokhorov_distance(a, a).first, 0.0, 0.0, "self distance");
    expect_near(prokhorov_distance(a, b).first, 0.3, 1e-12, "separated singletons");
    expect_near(prokhorov_distance(a, c).first, 1.0, 0.0, "distance saturates");
    expect_near(levy_distance({0.0}, {0.5}), 0.5, 1e-12, "shifted atoms");
    expect_near(levy_distance({0.0}, {3.0}), 1.0, 0.0, "far atoms saturate");
  }});

  checks.push_back({"generator determinism", [] {
    const auto d1 = gen_nominal(123, 50);
    const auto d2 = gen_nominal(123, 50);
    expect(d1.ys == d2.ys, "same seed, different nominal sample");
    const auto p1 = gen_perturbed(3, 7, 40);
    const auto p2 = gen_perturbed(3, 7, 40);
    expect(p1.ys == p2.ys && p1.xs == p2.xs, "same seed, different perturbed sample");
  }});

  checks.push_back({"tbar reference values", [] {
    expect_near(tbar(ModelSpec::linear(1), {0.0, 1.0}), 0.0, 1e-12, "constant one");
    expect_near(tbar(ModelSpec::linear(1), {0.0, 0.0}), -12.0, 1e-12, "constant zero");
  }});

  SelfTestResult result;
  for (const auto& check : checks) {
    try {
      check.body();
      ++result.passed;
      log << "ok - " << check.name << '\n';
    } catch (const std::exception& e) {
      ++result.failed;
      result.failures.push_back(std::string(check.name) + ": " + e.what());
      log << "FAIL - " << check.name << " (" << e.what() << ")\n";
    }
  }
  log << result.passed << " passed, " << result.failed << " failed\n";
  return result;
}

}  // namespace incvar
