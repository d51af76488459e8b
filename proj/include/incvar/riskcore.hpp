#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace incvar {

/// Lower and upper trim levels, 0 <= alpha < beta <= 1.  The mass below alpha
/// and above beta is discarded by the interval tail average.
struct TrimLevels {
  double alpha;
  double beta;

  TrimLevels(double a, double b) : alpha(a), beta(b) {
    if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b > 1.0 || !(a < b))
      throw std::domain_error("TrimLevels: need 0 <= alpha < beta <= 1, got [" +
                              std::to_string(a) + ", " + std::to_string(b) + "]");
  }

  double width() const { return beta - alpha; }
};

/// Finite loss law: atoms `values` (finite, >= 0) carrying strictly positive
/// weights with total mass one.  Raw weights whose total is within 1e-9 of one
/// are renormalized; larger deviations are rejected.
class WeightedLossSample {
 public:
  WeightedLossSample(Vec values, Vec weights)
      : values_(std::move(values)), weights_(std::move(weights)) {
    if (values_.empty())
      throw std::domain_error("WeightedLossSample: empty sample");
    if (values_.size() != weights_.size())
      throw std::invalid_argument("WeightedLossSample: " +
                                  std::to_string(values_.size()) + " values vs " +
                                  std::to_string(weights_.size()) + " weights");
    for (double v : values_)
      if (!std::isfinite(v) || v < 0.0)
        throw std::domain_error("WeightedLossSample: values must be finite and >= 0");
    for (double w : weights_)
      if (!std::isfinite(w) || !(w > 0.0))
        throw std::domain_error("WeightedLossSample: weights must be strictly positive");
    double total = kahan_sum(weights_);
    if (std::abs(total - 1.0) > 1e-9)
      throw std::domain_error("WeightedLossSample: weights sum to " +
                              format_g17(total) + ", expected 1 within 1e-9");
    if (total != 1.0)
      for (double& w : weights_) w /= total;
  }

  static WeightedLossSample uniform(Vec values) {
    Vec w(values.size(), values.empty() ? 1.0 : 1.0 / static_cast<double>(values.size()));
    return WeightedLossSample(std::move(values), std::move(w));
  }

  const Vec& values() const noexcept { return values_; }
  const Vec& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  Vec values_;
  Vec weights_;
};

namespace detail {

/// Atoms sorted ascending with cumulative masses; cum.back() is pinned to 1
/// so the topmost block always covers the upper end of (0, 1].
struct SortedLaw {
  Vec value;
  Vec cum;
};

inline SortedLaw sort_law(const WeightedLossSample& s) {
  const std::size_t n = s.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.values()[a] < s.values()[b];
  });
  SortedLaw law;
  law.value.resize(n);
  law.cum.resize(n);
  double running = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    law.value[r] = s.values()[idx[r]];
    running += s.weights()[idx[r]];
    law.cum[r] = running;
  }
  law.cum[n - 1] = 1.0;
  return law;
}

/// Length of (a, b] ∩ (lo, hi].
inline double overlap(double a, double b, double lo, double hi) {
  return std::max(0.0, std::min(b, hi) - std::max(a, lo));
}

/// Integral of the step quantile function over (lo, hi]: each sorted atom
/// contributes its value times the part of its mass block inside the window.
inline double quantile_mass(const SortedLaw& law, double lo, double hi) {
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t r = 0; r < law.value.size(); ++r) {
    acc += law.value[r] * overlap(prev, law.cum[r], lo, hi);
    prev = law.cum[r];
  }
  return acc;
}

inline double var_sorted(const SortedLaw& law, double gamma) {
  if (gamma <= 0.0) return law.value.front();
  if (gamma >= 1.0) return law.value.back();
  auto it = std::lower_bound(law.cum.begin(), law.cum.end(), gamma);
  return law.value[static_cast<std::size_t>(it - law.cum.begin())];
}

/// Mass at or below x.
inline double cdf_leq(const SortedLaw& law, double x) {
  auto it = std::upper_bound(law.value.begin(), law.value.end(), x);
  if (it == law.value.begin()) return 0.0;
  return law.cum[static_cast<std::size_t>(it - law.value.begin()) - 1];
}

}  // namespace detail

/// gamma-quantile of the loss law.  The 0-quantile is the smallest atom, the
/// 1-quantile the largest; at an interior cumulative boundary the lower block
/// wins, matching the left-continuous infimum quantile.
inline double var_at(const WeightedLossSample& s, double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0 || gamma > 1.0)
    throw std::domain_error("var_at: gamma must lie in [0, 1]");
  return detail::var_sorted(detail::sort_law(s), gamma);
}

/// Average quantile over (gamma, 1]: expected loss conditional on the worst
/// 1-gamma tail.  gamma = 1 has no tail to average and is rejected.
inline double cvar_at(const WeightedLossSample& s, double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0 || gamma >= 1.0)
    throw std::domain_error("cvar_at: gamma must lie in [0, 1)");
  return detail::quantile_mass(detail::sort_law(s), gamma, 1.0) / (1.0 - gamma);
}

/// Average quantile over (alpha, beta]: expected loss after discarding the
/// lightest alpha and the heaviest 1-beta mass.  Exact on finite laws.
inline double in_cvar(const WeightedLossSample& s, TrimLevels levels) {
  return detail::quantile_mass(detail::sort_law(s), levels.alpha, levels.beta) /
         levels.width();
}

/// Two-component mixture (1-eps)*d0 + eps*g as one reweighted law.  Atoms are
/// concatenated without merging duplicates; a side whose mass vanishes is
/// dropped so every stored weight stays positive.
inline WeightedLossSample mixture(const WeightedLossSample& d0,
                                  const WeightedLossSample& g, double eps) {
  if (!std::isfinite(eps) || eps < 0.0 || eps > 1.0)
    throw std::domain_error("mixture: eps must lie in [0, 1]");
  Vec values, weights;
  values.reserve(d0.size() + g.size());
  weights.reserve(d0.size() + g.size());
  if (eps < 1.0) {
    for (std::size_t i = 0; i < d0.size(); ++i) {
      values.push_back(d0.values()[i]);
      weights.push_back(d0.weights()[i] * (1.0 - eps));
    }
  }
  if (eps > 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      values.push_back(g.values()[i]);
      weights.push_back(g.weights()[i] * eps);
    }
  }
  return WeightedLossSample(std::move(values), std::move(weights));
}

inline constexpr double kMixtureBoundTol = 1e-9;

/// Outcome of one clause of the contamination trim-bound check.  A clause whose
/// epsilon regime (or side condition) does not hold is reported as not
/// applicable, never as failed.
struct MixtureBoundClause {
  bool applicable = false;
  bool pass = true;
  double lhs = std::numeric_limits<double>::quiet_NaN();
  double rhs = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

/// Report of the three bounds tying the trimmed tail average of a mixture
/// (1-eps)*d0 + eps*g to functionals of the components:
///   - upper_rescaled: trim d0 at levels divided by 1-eps (small eps),
///   - upper_quantile: a single d0 quantile dominates, provided some mass
///     level eta places enough of g below that quantile,
///   - lower_tail: once contamination exceeds the discarded upper mass, the
///     contaminant's own lower tail average forces the value up.
struct MixtureBoundReport {
  double eps = 0.0;
  double alpha = 0.0;
  double beta = 1.0;
  MixtureBoundClause upper_rescaled;
  MixtureBoundClause upper_quantile;
  MixtureBoundClause lower_tail;
  /// Mass level chosen for upper_quantile (largest feasible).
  double eta = std::numeric_limits<double>::quiet_NaN();
  /// Quantile level (beta - eps*eta) / (1 - eps) the bound evaluates.
  double quantile_level = std::numeric_limits<double>::quiet_NaN();
  /// When quantile_level sits on a cumulative atom boundary of d0 (within
  /// 1e-12), the value of the next atom up is also reported so callers can see
  /// both sides of the jump.
  bool level_at_atom_boundary = false;
  double quantile_upper_alt = std::numeric_limits<double>::quiet_NaN();

  bool all_applicable_pass() const {
    return (!upper_rescaled.applicable || upper_rescaled.pass) &&
           (!upper_quantile.applicable || upper_quantile.pass) &&
           (!lower_tail.applicable || lower_tail.pass);
  }
};

/// Certifies the three mixture bounds numerically for concrete component laws.
/// Tolerance kMixtureBoundTol on each comparison.
inline MixtureBoundReport certify_lemma1(const WeightedLossSample& d0,
                                         const WeightedLossSample& g, double eps,
                                         TrimLevels levels) {
  if (!std::isfinite(eps) || eps < 0.0 || eps > 1.0)
    throw std::domain_error("certify_lemma1: eps must lie in [0, 1]");
  const double a = levels.alpha;
  const double b = levels.beta;

  MixtureBoundReport rep;
  rep.eps = eps;
  rep.alpha = a;
  rep.beta = b;

  const double mixed_value = in_cvar(mixture(d0, g, eps), levels);
  const auto D = detail::sort_law(d0);
  const auto G = detail::sort_law(g);

  if (eps <= 1.0 - b) {
    auto& cl = rep.upper_rescaled;
    cl.applicable = true;
    cl.lhs = mixed_value;
    cl.rhs = in_cvar(d0, TrimLevels(a / (1.0 - eps), b / (1.0 - eps)));
    cl.pass = cl.lhs <= cl.rhs + kMixtureBoundTol;
  } else {
    rep.upper_rescaled.note = "needs eps <= 1 - beta";
  }

  if (eps > 0.0 && eps <= b && 1.0 - eps > 1e-12) {
    const double eta_min = std::max(0.0, (eps + b - 1.0) / eps);
    const double eta_max = std::min(1.0, b / eps);
    Vec candidates{eta_min, eta_max};
    for (double c : G.cum)
      if (c >= eta_min && c <= eta_max) candidates.push_back(c);
    for (double c : D.cum) {
      double eta = (b - (1.0 - eps) * c) / eps;
      if (eta >= eta_min && eta <= eta_max) candidates.push_back(eta);
    }
    std::sort(candidates.begin(), candidates.end(), std::greater<double>());

    auto level_of = [&](double eta) {
      return std::clamp((b - eps * eta) / (1.0 - eps), 0.0, 1.0);
    };
    bool found = false;
    double eta_best = 0.0;
    for (double eta : candidates) {
      double q = detail::var_sorted(D, level_of(eta));
      if (detail::cdf_leq(G, q) + 1e-12 >= eta) {
        eta_best = eta;
        found = true;
        break;
      }
    }
    if (found) {
      auto& cl = rep.upper_quantile;
      cl.applicable = true;
      rep.eta = eta_best;
      rep.quantile_level = level_of(eta_best);
      cl.lhs = mixed_value;
      cl.rhs = detail::var_sorted(D, rep.quantile_level);
      cl.pass = cl.lhs <= cl.rhs + kMixtureBoundTol;
      auto it = std::lower_bound(D.cum.begin(), D.cum.end(),
                                 rep.quantile_level - 1e-12);
      std::size_t i = static_cast<std::size_t>(it - D.cum.begin());
      if (i < D.cum.size() && std::abs(D.cum[i] - rep.quantile_level) <= 1e-12 &&
          i + 1 < D.value.size()) {
        rep.level_at_atom_boundary = true;
        rep.quantile_upper_alt = D.value[i + 1];
      }
    } else {
      rep.upper_quantile.note = "no feasible mass level eta";
    }
  } else {
    rep.upper_quantile.note = "needs 0 < eps <= beta";
  }

  if (eps > 1.0 - b && eps <= 1.0 - a) {
    auto& cl = rep.lower_tail;
    cl.applicable = true;
    const double q = std::min(1.0, (b + eps - 1.0) / eps);
    cl.lhs = mixed_value;
    cl.rhs = ((b + eps - 1.0) / (b - a)) * in_cvar(g, TrimLevels(0.0, q));
    cl.pass = cl.lhs >= cl.rhs - kMixtureBoundTol;
  } else {
    rep.lower_tail.note = "needs 1 - beta < eps <= 1 - alpha";
  }

  return rep;
}

}  // namespace incvar
