#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "riskcore.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace incvar {

enum class Scenario {
  contamination_sweep,
  level_sweep_beta,
  level_sweep_alpha,
  perturbation_sweep,
};

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::contamination_sweep: return "contamination_sweep";
    case Scenario::level_sweep_beta: return "level_sweep_beta";
    case Scenario::level_sweep_alpha: return "level_sweep_alpha";
    case Scenario::perturbation_sweep: return "perturbation_sweep";
  }
  return "unknown";
}

/// Name of the swept quantity, used for the CSV grid_param column.
inline const char* grid_param_name(Scenario s) {
  switch (s) {
    case Scenario::contamination_sweep: return "eps";
    case Scenario::level_sweep_beta: return "beta";
    case Scenario::level_sweep_alpha: return "alpha";
    case Scenario::perturbation_sweep: return "k";
  }
  return "unknown";
}

struct ScenarioConfig {
  Scenario scenario = Scenario::contamination_sweep;
  int n_nominal = 200;
  int n_contam = 200;
  Vec grid;                        // eps, beta, alpha, or k values depending on scenario
  TrimLevels levels{0.05, 0.95};
  double gamma_cvar = 0.5;
  double contamination_eps = 0.05; // mixing fraction held fixed during level sweeps
  SolveConfig solver;
  std::uint64_t master_seed = 0;
  double noise_sigma = 0.05;
  // Wall-clock timing makes output bytes run-dependent, so it is opt-in; when
  // off the seconds column is written as 0.
  bool record_timing = false;

  void validate() const {
    if (n_nominal < 1 || n_contam < 1)
      throw std::domain_error("ScenarioConfig: sample sizes must be >= 1");
    if (grid.empty()) throw std::domain_error("ScenarioConfig: empty grid");
    if (!all_finite(grid)) throw std::domain_error("ScenarioConfig: non-finite grid value");
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i - 1] < grid[i]))
        throw std::domain_error("ScenarioConfig: grid must be strictly increasing");
    if (!(gamma_cvar >= 0.0 && gamma_cvar < 1.0))
      throw std::domain_error("ScenarioConfig: gamma_cvar must lie in [0, 1)");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
      throw std::domain_error("ScenarioConfig: noise_sigma must be >= 0");
    if (!(contamination_eps >= 0.0 && contamination_eps < 1.0))
      throw std::domain_error("ScenarioConfig: contamination_eps must lie in [0, 1)");
    solver.validate();
    switch (scenario) {
      case Scenario::contamination_sweep:
        for (double g : grid)
          if (!(g >= 0.0 && g < 1.0))
            throw std::domain_error("ScenarioConfig: eps grid values must lie in [0, 1)");
        break;
      case Scenario::level_sweep_beta:
        for (double g : grid)
          if (!(g > levels.alpha && g <= 1.0))
            throw std::domain_error(
                "ScenarioConfig: beta grid values must lie in (alpha, 1]");
        break;
      case Scenario::level_sweep_alpha:
        for (double g : grid)
          if (!(g >= 0.0 && g < levels.beta))
            throw std::domain_error(
                "ScenarioConfig: alpha grid values must lie in [0, beta)");
        break;
      case Scenario::perturbation_sweep:
        for (double g : grid)
          if (!(g >= 1.0) || std::abs(g - std::round(g)) > 1e-9)
            throw std::domain_error(
                "ScenarioConfig: k grid values must be integers >= 1");
        break;
    }
  }
};

struct SweepRow {
  double grid_value = 0.0;
  std::string estimator;
  double tbar = 0.0;
  double tbar_true = 0.0;
  double objective = 0.0;
  double seconds = 0.0;
  bool failed = false;
};

struct SweepResult {
  ScenarioConfig config;
  std::vector<SweepRow> rows;     // grid-major, estimator order incvar/expectation/cvar
  std::string version = kVersion;
};

/// The regression family shared by all experiments: scalar input, two
/// positive and two negative max-affine pieces.
inline ModelSpec sweep_model() { return ModelSpec::piecewise_affine(1, 2, 2); }

/// Generator parameters of the clean data: f(x) = max{-x+1, -2} - max{-x+3, -2x+2}.
inline ParamVector nominal_true_theta() {
  return {-1.0, 1.0, 0.0, -2.0, -1.0, 3.0, -2.0, 2.0};
}

/// Steep outlier family: f(x) = max{100x+200, 300x-400} - max{200x-100, 400x+100}.
inline ParamVector contamination_theta() {
  return {100.0, 200.0, 300.0, -400.0, 200.0, -100.0, 400.0, 100.0};
}

/// Base shape scaled by k in the perturbation construction:
/// f(x) = max{x+2, 3x-4} - max{2x-1, 4x+1}.
inline ParamVector perturbation_base_theta() {
  return {1.0, 2.0, 3.0, -4.0, 2.0, -1.0, 4.0, 1.0};
}

inline DataSet gen_nominal(std::uint64_t seed, int n = 200, double noise_sigma = 0.05) {
  const ModelSpec spec = sweep_model();
  const ParamVector theta = nominal_true_theta();
  Rng rng(seed);
  std::vector<Vec> xs;
  Vec ys;
  xs.reserve(static_cast<std::size_t>(n));
  ys.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double xi = rng.normal();
    xs.push_back({x});
    ys.push_back(predict(spec, theta, {x}) + noise_sigma * xi);
  }
  return DataSet::uniform(std::move(xs), std::move(ys));
}

inline DataSet gen_contamination(std::uint64_t seed, int n = 200,
                                 double noise_sigma = 0.05) {
  const ModelSpec spec = sweep_model();
  const ParamVector theta = contamination_theta();
  Rng rng(seed);
  std::vector<Vec> xs;
  Vec ys;
  xs.reserve(static_cast<std::size_t>(n));
  ys.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = 200.0 * rng.normal();     // variance 4e4
    const double xi = rng.normal();
    xs.push_back({x});
    ys.push_back(predict(spec, theta, {x}) + noise_sigma * xi);
  }
  return DataSet::uniform(std::move(xs), std::move(ys));
}

/// Perturbed sample D_k: mixture of fresh nominal draws (probability 1-1/k)
/// and uniform picks from a fixed 200-point steep grid scaled by k, each draw
/// translated by a uniform unit-disk vector shrunk by 1/k.
inline DataSet gen_perturbed(int k, std::uint64_t seed, int n = 1000,
                             double noise_sigma = 0.05) {
  if (k < 1) throw std::domain_error("gen_perturbed: k must be >= 1");
  const ModelSpec spec = sweep_model();
  const ParamVector theta_nom = nominal_true_theta();
  const ParamVector theta_base = perturbation_base_theta();
  Rng rng(seed);

  constexpr int kGridSize = 200;
  std::array<double, kGridSize> grid_x{}, grid_y{};
  for (int j = 0; j < kGridSize; ++j) {
    grid_x[static_cast<std::size_t>(j)] = 10.0 * j;
    grid_y[static_cast<std::size_t>(j)] =
        static_cast<double>(k) * predict(spec, theta_base, {10.0 * j}) +
        noise_sigma * rng.normal();
  }

  const double p_nominal = 1.0 - 1.0 / static_cast<double>(k);
  const double shrink = 1.0 / static_cast<double>(k);
  std::vector<Vec> xs;
  Vec ys;
  xs.reserve(static_cast<std::size_t>(n));
  ys.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x, y;
    if (rng.uniform() < p_nominal) {
      x = rng.normal();
      y = predict(spec, theta_nom, {x}) + noise_sigma * rng.normal();
    } else {
      const std::size_t j = static_cast<std::size_t>(rng.below(kGridSize));
      x = grid_x[j];
      y = grid_y[j];
    }
    const auto [dx, dy] = rng.unit_disk();
    xs.push_back({x + shrink * dx});
    ys.push_back(y + shrink * dy);
  }
  return DataSet::uniform(std::move(xs), std::move(ys));
}

/// Joint (x, y) point cloud of a dataset, for distribution-distance checks.
inline EmpiricalCloud to_cloud(const DataSet& data) {
  EmpiricalCloud cloud;
  cloud.points.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    Vec pt = data.xs[i];
    pt.push_back(data.ys[i]);
    cloud.points.push_back(std::move(pt));
  }
  return cloud;
}

/// Seeded subsample of m distinct points, as a cloud (partial Fisher-Yates).
inline EmpiricalCloud cloud_subsample(const DataSet& data, int m, std::uint64_t seed) {
  if (m < 1 || static_cast<std::size_t>(m) > data.size())
    throw std::domain_error("cloud_subsample: m out of range");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  EmpiricalCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(idx.size() - static_cast<std::size_t>(i))));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    Vec pt = data.xs[idx[static_cast<std::size_t>(i)]];
    pt.push_back(data.ys[idx[static_cast<std::size_t>(i)]]);
    cloud.points.push_back(std::move(pt));
  }
  return cloud;
}

/// Grid-averaged log magnitude of the fitted function over x = -100 + 0.1 i,
/// i = 0..1999, with |f| floored at 1e-12 to keep the average finite.
inline double tbar(const ModelSpec& spec, const ParamVector& theta) {
  double acc = 0.0;
  Vec x(1);
  for (int i = 0; i < 2000; ++i) {
    x[0] = -100.0 + 0.1 * i;
    acc += std::log10(std::max(std::abs(predict(spec, theta, x)), 1e-12));
  }
  return acc / 2000.0;
}

namespace detail {

inline DataSet build_cell_data(const ScenarioConfig& cfg, double grid_value,
                               std::uint64_t data_seed) {
  switch (cfg.scenario) {
    case Scenario::contamination_sweep: {
      DataSet nominal = gen_nominal(derive_seed(data_seed, {hash_tag("nominal")}),
                                    cfg.n_nominal, cfg.noise_sigma);
      if (grid_value <= 0.0) return nominal;
      DataSet contam = gen_contamination(derive_seed(data_seed, {hash_tag("contam")}),
                                         cfg.n_contam, cfg.noise_sigma);
      return mixture(nominal, contam, grid_value);
    }
    case Scenario::level_sweep_beta:
    case Scenario::level_sweep_alpha: {
      DataSet nominal = gen_nominal(derive_seed(data_seed, {hash_tag("nominal")}),
                                    cfg.n_nominal, cfg.noise_sigma);
      if (cfg.contamination_eps <= 0.0) return nominal;
      DataSet contam = gen_contamination(derive_seed(data_seed, {hash_tag("contam")}),
                                         cfg.n_contam, cfg.noise_sigma);
      return mixture(nominal, contam, cfg.contamination_eps);
    }
    case Scenario::perturbation_sweep: {
      const int k = static_cast<int>(std::llround(grid_value));
      return gen_perturbed(k, derive_seed(data_seed, {hash_tag("perturbed")}), 1000,
                           cfg.noise_sigma);
    }
  }
  throw std::logic_error("build_cell_data: unhandled scenario");
}

inline TrimLevels estimator_levels(const ScenarioConfig& cfg, double grid_value,
                                   std::size_t estimator) {
  if (estimator == 1) return TrimLevels{0.0, 1.0};                  // expectation
  if (estimator == 2) return TrimLevels{cfg.gamma_cvar, 1.0};       // upper-tail CVaR
  switch (cfg.scenario) {
    case Scenario::level_sweep_beta: return TrimLevels{cfg.levels.alpha, grid_value};
    case Scenario::level_sweep_alpha: return TrimLevels{grid_value, cfg.levels.beta};
    default: return cfg.levels;
  }
}

}  // namespace detail

/// Runs one sweep: for every grid value, fits the trimmed estimator plus the
/// expectation and CVaR baselines on the same generated dataset and records
/// the T-bar summary of each fit.  Solver streams derive from (master_seed,
/// scenario, grid index, estimator) and data streams from (master_seed,
/// scenario), so results are reproducible bit-for-bit and independent of
/// `jobs`.
inline SweepResult run_sweep(const ScenarioConfig& config, int jobs = 1) {
  config.validate();
  const ModelSpec spec = sweep_model();
  const LossSpec loss = LossSpec::absolute();
  const ParamVector theta_star = nominal_true_theta();
  const double tb_true = tbar(spec, theta_star);
  static constexpr std::array<const char*, 3> kEstimators{"incvar", "expectation",
                                                          "cvar"};
  const std::uint64_t scen_tag = hash_tag(scenario_name(config.scenario));

  SweepResult result;
  result.config = config;
  result.rows.resize(config.grid.size() * kEstimators.size());

  parallel_for(result.rows.size(), jobs, [&](std::size_t cell) {
    const std::size_t gi = cell / kEstimators.size();
    const std::size_t e = cell % kEstimators.size();
    const double g = config.grid[gi];

    SweepRow row;
    row.grid_value = g;
    row.estimator = kEstimators[e];
    row.tbar_true = tb_true;

    // Contamination and level sweeps reuse one nominal and one contamination
    // cloud across the whole grid, remixed per cell, so grid cells differ only
    // in the quantity being swept.  Perturbation draws fresh data per k since
    // each k is a different distribution.
    std::uint64_t data_seed = derive_seed(config.master_seed, {scen_tag, hash_tag("data")});
    if (config.scenario == Scenario::perturbation_sweep)
      data_seed = derive_seed(config.master_seed, {scen_tag, hash_tag("data"), gi});
    SolveConfig solver = config.solver;
    solver.seed = derive_seed(config.master_seed, {scen_tag, gi, hash_tag(kEstimators[e])});

    const auto start = std::chrono::steady_clock::now();
    try {
      const DataSet data = detail::build_cell_data(config, g, data_seed);
      const TrimLevels fit_levels = detail::estimator_levels(config, g, e);
      SolveReport report = fit_incvar(data, spec, loss, fit_levels, solver, 1);
      row.tbar = tbar(spec, report.best_theta);
      row.objective = report.best_objective;
    } catch (const NumericalError&) {
      row.failed = true;
      row.tbar = 0.0;
      row.objective = 0.0;
    }
    if (config.record_timing) {
      row.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.rows[cell] = std::move(row);
  });
  return result;
}

inline void emit_csv(const SweepResult& result, std::ostream& os) {
  os << "scenario,grid_param,grid_value,estimator,tbar,tbar_true,objective,seconds,failed\n";
  const char* scen = scenario_name(result.config.scenario);
  const char* param = grid_param_name(result.config.scenario);
  for (const auto& row : result.rows) {
    os << scen << ',' << param << ',' << format_g17(row.grid_value) << ','
       << row.estimator << ',' << format_g17(row.tbar) << ','
       << format_g17(row.tbar_true) << ',' << format_g17(row.objective) << ','
       << format_g17(row.seconds) << ',' << (row.failed ? 1 : 0) << '\n';
  }
}

namespace detail {

inline std::string svg_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Line plot of tbar against the grid value, one polyline per estimator plus
/// a dashed reference at the true parameter's value.  Self-contained SVG:
/// no scripts, no external fonts.
inline void emit_svg(const SweepResult& result, std::ostream& os) {
  static constexpr std::array<const char*, 3> kTags{"incvar", "expectation", "cvar"};
  static constexpr std::array<const char*, 3> kColors{"#1f77b4", "#d62728", "#2ca02c"};
  const double width = 840.0, height = 520.0;
  const double ml = 70.0, mr = 160.0, mt = 30.0, mb = 50.0;

  double x_lo = result.config.grid.front(), x_hi = result.config.grid.back();
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  double y_lo = std::numeric_limits<double>::infinity(), y_hi = -y_lo;
  for (const auto& row : result.rows) {
    if (row.failed) continue;
    y_lo = std::min({y_lo, row.tbar, row.tbar_true});
    y_hi = std::max({y_hi, row.tbar, row.tbar_true});
  }
  if (!(y_lo < y_hi)) {
    y_lo = (y_lo == std::numeric_limits<double>::infinity()) ? -1.0 : y_lo - 1.0;
    y_hi = y_lo + 2.0;
  }
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  auto px = [&](double v) { return ml + (v - x_lo) / (x_hi - x_lo) * (width - ml - mr); };
  auto py = [&](double v) {
    return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb);
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << ' '
     << height << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
     << "\" fill=\"white\"/>\n";

  // axes and ticks
  os << "<line x1=\"" << detail::svg_num(ml) << "\" y1=\"" << detail::svg_num(height - mb)
     << "\" x2=\"" << detail::svg_num(width - mr) << "\" y2=\""
     << detail::svg_num(height - mb) << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << detail::svg_num(ml) << "\" y1=\"" << detail::svg_num(mt)
     << "\" x2=\"" << detail::svg_num(ml) << "\" y2=\"" << detail::svg_num(height - mb)
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = y_lo + (y_hi - y_lo) * t / 4.0;
    os << "<text x=\"" << detail::svg_num(ml - 8) << "\" y=\""
       << detail::svg_num(py(v) + 4) << "\" text-anchor=\"end\">"
       << detail::svg_num(v) << "</text>\n";
    os << "<line x1=\"" << detail::svg_num(ml - 4) << "\" y1=\"" << detail::svg_num(py(v))
       << "\" x2=\"" << detail::svg_num(ml) << "\" y2=\"" << detail::svg_num(py(v))
       << "\" stroke=\"black\"/>\n";
  }
  for (double g : result.config.grid) {
    os << "<line x1=\"" << detail::svg_num(px(g)) << "\" y1=\""
       << detail::svg_num(height - mb) << "\" x2=\"" << detail::svg_num(px(g))
       << "\" y2=\"" << detail::svg_num(height - mb + 4) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << detail::svg_num(px(g)) << "\" y=\""
       << detail::svg_num(height - mb + 18) << "\" text-anchor=\"middle\">"
       << detail::svg_num(g) << "</text>\n";
  }
  os << "<text x=\"" << detail::svg_num((ml + width - mr) / 2) << "\" y=\""
     << detail::svg_num(height - 12) << "\" text-anchor=\"middle\">"
     << grid_param_name(result.config.scenario) << "</text>\n";

  // dashed reference at tbar_true
  if (!result.rows.empty()) {
    const double ref = result.rows.front().tbar_true;
    os << "<line x1=\"" << detail::svg_num(ml) << "\" y1=\"" << detail::svg_num(py(ref))
       << "\" x2=\"" << detail::svg_num(width - mr) << "\" y2=\""
       << detail::svg_num(py(ref))
       << "\" stroke=\"#888888\" stroke-dasharray=\"6 4\"/>\n";
  }

  for (std::size_t e = 0; e < kTags.size(); ++e) {
    os << "<polyline fill=\"none\" stroke=\"" << kColors[e] << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (const auto& row : result.rows) {
      if (row.failed || row.estimator != kTags[e]) continue;
      if (!first) os << ' ';
      os << detail::svg_num(px(row.grid_value)) << ',' << detail::svg_num(py(row.tbar));
      first = false;
    }
    os << "\"/>\n";
    const double ly = mt + 20.0 * static_cast<double>(e);
    os << "<line x1=\"" << detail::svg_num(width - mr + 12) << "\" y1=\""
       << detail::svg_num(ly) << "\" x2=\"" << detail::svg_num(width - mr + 40)
       << "\" y2=\"" << detail::svg_num(ly) << "\" stroke=\"" << kColors[e]
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << detail::svg_num(width - mr + 46) << "\" y=\""
       << detail::svg_num(ly + 4) << "\">" << kTags[e] << "</text>\n";
  }
  os << "</svg>\n";
}

inline void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("emit_csv: cannot open " + path);
  emit_csv(result, os);
  if (!os) throw std::runtime_error("emit_csv: write failed for " + path);
}

inline void emit_svg(const SweepResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("emit_svg: cannot open " + path);
  emit_svg(result, os);
  if (!os) throw std::runtime_error("emit_svg: write failed for " + path);
}

}  // namespace incvar
