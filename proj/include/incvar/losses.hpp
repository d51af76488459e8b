#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"

namespace incvar {

enum class LossKind { absolute, squared, huber };

inline const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::absolute: return "absolute";
    case LossKind::squared: return "squared";
    case LossKind::huber: return "huber";
  }
  return "?";
}

/// Scalar loss applied to a nonnegative residual magnitude.  `delta` is the
/// huber knee and is ignored by the other kinds.
struct LossSpec {
  LossKind kind = LossKind::absolute;
  double delta = 1.0;

  static LossSpec absolute() { return {LossKind::absolute, 1.0}; }
  static LossSpec squared() { return {LossKind::squared, 1.0}; }
  static LossSpec huber(double delta) {
    if (!std::isfinite(delta) || !(delta > 0.0))
      throw std::domain_error("LossSpec: huber delta must be > 0");
    return {LossKind::huber, delta};
  }
};

/// Loss of a residual magnitude t >= 0.
inline double eval_loss(const LossSpec& spec, double t) {
  if (!std::isfinite(t) || t < 0.0)
    throw std::domain_error("eval_loss: t must be finite and >= 0");
  switch (spec.kind) {
    case LossKind::absolute:
      return t;
    case LossKind::squared:
      return t * t;
    case LossKind::huber:
      return t <= spec.delta ? 0.5 * t * t : spec.delta * (t - 0.5 * spec.delta);
  }
  return 0.0;
}

/// d/dt of the loss.  At the huber knee both branches give the same slope; the
/// quadratic branch value is returned.
inline double loss_slope(const LossSpec& spec, double t) {
  if (!std::isfinite(t) || t < 0.0)
    throw std::domain_error("loss_slope: t must be finite and >= 0");
  switch (spec.kind) {
    case LossKind::absolute:
      return 1.0;
    case LossKind::squared:
      return 2.0 * t;
    case LossKind::huber:
      return t <= spec.delta ? t : spec.delta;
  }
  return 0.0;
}

/// Result of sampling the growth condition L(s*t) <= s^k * L(t).  A positive
/// margin is a counterexample; the check reports, it never throws on failure.
struct GrowthCheckReport {
  bool satisfied = true;
  double max_margin = -std::numeric_limits<double>::infinity();
  double witness_s = std::numeric_limits<double>::quiet_NaN();
  double witness_t = std::numeric_limits<double>::quiet_NaN();
  int violations = 0;
};

/// Samples s in [0, 1) and t in (T, 10T], recording the largest observed
/// L(s*t)/L(t) - s^k.  Margins above 1e-12 count as violations.
inline GrowthCheckReport check_c1_growth(const LossSpec& spec, double k, double T,
                                         int num_samples, std::uint64_t seed) {
  if (!(k > 1.0)) throw std::domain_error("check_c1_growth: need k > 1");
  if (!(T > 0.0)) throw std::domain_error("check_c1_growth: need T > 0");
  if (num_samples <= 0) throw std::domain_error("check_c1_growth: need num_samples > 0");
  Rng rng(derive_seed(seed, {hash_tag("c1_growth")}));
  GrowthCheckReport rep;
  for (int i = 0; i < num_samples; ++i) {
    double s = rng.uniform();
    double t = T * (1.0 + 9.0 * rng.uniform());
    double margin = eval_loss(spec, s * t) / eval_loss(spec, t) - std::pow(s, k);
    if (margin > rep.max_margin) {
      rep.max_margin = margin;
      rep.witness_s = s;
      rep.witness_t = t;
    }
    if (margin > 1e-12) ++rep.violations;
  }
  rep.satisfied = rep.max_margin <= 1e-12;
  return rep;
}

/// Ratio table L(s*t)/L(t) over a grid, used to probe whether small relative
/// residuals become negligible as the scale grows.
struct VanishingRatioReport {
  struct Entry {
    double t;
    double s;
    double ratio;
    bool within_cap;
  };
  std::vector<Entry> table;
  double cap = 1.0;
  double tail_ratio = std::numeric_limits<double>::quiet_NaN();
  double tail_t = std::numeric_limits<double>::quiet_NaN();
  double tail_s = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
};

inline constexpr double kVanishingTol = 1e-3;

/// Tabulates L(s*t)/L(t) for increasing t_grid and decreasing s_grid.  Passes
/// when the tail entry (largest t, smallest s, subject to s*t <= cap) falls
/// below kVanishingTol.
inline VanishingRatioReport check_c2_vanishing(const LossSpec& spec, const Vec& t_grid,
                                               const Vec& s_grid, double cap = 1.0) {
  if (t_grid.empty() || s_grid.empty())
    throw std::domain_error("check_c2_vanishing: empty grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw std::domain_error("check_c2_vanishing: t_grid must increase");
  for (std::size_t j = 1; j < s_grid.size(); ++j)
    if (!(s_grid[j] < s_grid[j - 1]))
      throw std::domain_error("check_c2_vanishing: s_grid must decrease");
  if (!(t_grid.front() > 0.0))
    throw std::domain_error("check_c2_vanishing: need t > 0");
  if (!(s_grid.back() >= 0.0))
    throw std::domain_error("check_c2_vanishing: need s >= 0");

  VanishingRatioReport rep;
  rep.cap = cap;
  for (double t : t_grid)
    for (double s : s_grid)
      rep.table.push_back({t, s, eval_loss(spec, s * t) / eval_loss(spec, t),
                           s * t <= cap});

  const double s_tail = s_grid.back();
  for (std::size_t i = t_grid.size(); i-- > 0;) {
    if (s_tail * t_grid[i] <= cap) {
      rep.tail_t = t_grid[i];
      rep.tail_s = s_tail;
      rep.tail_ratio = eval_loss(spec, s_tail * rep.tail_t) / eval_loss(spec, rep.tail_t);
      break;
    }
  }
  rep.pass = std::isfinite(rep.tail_ratio) && rep.tail_ratio < kVanishingTol;
  return rep;
}

}  // namespace incvar
