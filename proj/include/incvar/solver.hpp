#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "losses.hpp"
#include "models.hpp"
#include "riskcore.hpp"
#include "rng.hpp"

namespace incvar {

struct SolveConfig {
  int restarts = 20;
  int max_outer_iters = 200;
  double outer_tol = 1e-8;
  int inner_max_iters = 150;
  double inner_tol = 1e-9;
  double init_scale = 1.0;
  std::uint64_t seed = 0;
  double smoothing_eps = 1e-3;

  void validate() const {
    if (restarts < 1) throw std::domain_error("SolveConfig: restarts must be >= 1");
    if (max_outer_iters < 1) throw std::domain_error("SolveConfig: max_outer_iters must be >= 1");
    if (inner_max_iters < 1) throw std::domain_error("SolveConfig: inner_max_iters must be >= 1");
    if (!(outer_tol > 0.0) || !std::isfinite(outer_tol))
      throw std::domain_error("SolveConfig: outer_tol must be > 0");
    if (!(inner_tol > 0.0) || !std::isfinite(inner_tol))
      throw std::domain_error("SolveConfig: inner_tol must be > 0");
    if (!(init_scale > 0.0) || !std::isfinite(init_scale))
      throw std::domain_error("SolveConfig: init_scale must be > 0");
    if (smoothing_eps < 0.0 || !std::isfinite(smoothing_eps))
      throw std::domain_error("SolveConfig: smoothing_eps must be >= 0");
  }
};

enum class Termination { tol_reached, max_iters };

inline const char* termination_name(Termination t) {
  return t == Termination::tol_reached ? "tol_reached" : "max_iters";
}

struct RestartTrace {
  Vec objectives;           // value at the start plus one entry per outer step
  ParamVector theta;
  double objective = std::numeric_limits<double>::infinity();
  Termination termination = Termination::max_iters;
};

struct SolveReport {
  ParamVector best_theta;
  double best_objective = std::numeric_limits<double>::infinity();
  int best_restart = -1;
  Termination termination = Termination::max_iters;
  std::vector<RestartTrace> restarts;
};

/// Trimmed tail average of the pointwise losses at theta.
inline double objective(const DataSet& data, const ModelSpec& spec, const LossSpec& loss,
                        TrimLevels levels, const ParamVector& theta) {
  return in_cvar(loss_sample(data, spec, loss, theta), levels);
}

/// Affine function m(th) = value + <slope, th - ref>; a global lower bound on
/// the concave-side component it was cut from.
struct AffineMinorant {
  Vec slope;
  double value = 0.0;
  ParamVector ref;

  double operator()(const ParamVector& th) const {
    double acc = value;
    for (std::size_t i = 0; i < slope.size(); ++i) acc += slope[i] * (th[i] - ref[i]);
    return acc;
  }
};

/// The two convex halves whose difference is the trimmed objective, evaluated
/// at theta, plus the linearization of the subtracted half.
struct DcaParts {
  double u = 0.0;
  double v = 0.0;
  AffineMinorant minorant;
};

namespace detail {

/// Per-point mass captured by the window (gamma, 1] when points are ranked by
/// loss.  Ties rank by point index (stable sort), so the assignment is
/// deterministic.  Output indexed by original point position.
inline Vec rank_masses(const Vec& losses, const Vec& weights, double gamma) {
  const std::size_t n = losses.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  Vec out(n, 0.0);
  double prev = 0.0;
  double cum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    cum = (r + 1 == n) ? 1.0 : cum + weights[idx[r]];
    out[idx[r]] = std::max(0.0, std::min(cum, 1.0) - std::max(prev, gamma));
    prev = cum;
  }
  return out;
}

struct TrimmedSum {
  double value = 0.0;   // (sum_r mass_r * loss_r + sum_i w_i psi_i) / (beta - alpha)
  Vec grad;
};

/// Exact convex half U_gamma(theta)/(beta-alpha) with optional subgradient.
inline TrimmedSum trimmed_sum(const DataSet& data, const ModelSpec& spec,
                              const LossSpec& loss, TrimLevels levels, double gamma,
                              const ParamVector& theta, bool want_grad) {
  const std::size_t n = data.size();
  const std::size_t q = theta.size();
  std::vector<DcEval> evals;
  Vec losses(n);
  evals.reserve(want_grad ? n : 0);
  Vec phis(n), psis(n);
  for (std::size_t i = 0; i < n; ++i) {
    DcEval ev = dc_components(spec, loss, data.xs[i], data.ys[i], theta);
    phis[i] = ev.phi;
    psis[i] = ev.psi;
    losses[i] = ev.phi - ev.psi;
    if (!std::isfinite(losses[i]))
      throw NumericalError("non-finite loss at data point " + std::to_string(i), theta);
    if (want_grad) evals.push_back(std::move(ev));
  }
  Vec mass = rank_masses(losses, data.weights, gamma);
  TrimmedSum out;
  const double inv = 1.0 / levels.width();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += mass[i] * losses[i] + data.weights[i] * psis[i];
  out.value = inv * acc;
  if (want_grad) {
    out.grad.assign(q, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = mass[i];
      const double b = data.weights[i];
      for (std::size_t j = 0; j < q; ++j)
        out.grad[j] += a * (evals[i].phi_grad[j] - evals[i].psi_grad[j]) +
                       b * evals[i].psi_grad[j];
    }
    for (double& g : out.grad) g *= inv;
  }
  return out;
}

// ---- smoothed inner surrogate -------------------------------------------

/// Log-sum-exp of two values with temperature eps; weights are the softmax.
inline double smooth_max2(double a, double b, double eps, double& wa, double& wb) {
  const double m = std::max(a, b);
  const double ea = std::exp((a - m) / eps);
  const double eb = std::exp((b - m) / eps);
  const double s = ea + eb;
  wa = ea / s;
  wb = eb / s;
  return m + eps * std::log(s);
}

/// Smoothed convex split of one point's loss, written into caller buffers to
/// keep the inner loop allocation free.
inline void smooth_split(const ModelSpec& spec, const LossSpec& loss, const Vec& x,
                         double y, const ParamVector& theta, double eps, double& phi,
                         double& psi, Vec& phi_grad, Vec& psi_grad) {
  const std::size_t q = theta.size();
  phi_grad.assign(q, 0.0);
  psi_grad.assign(q, 0.0);
  if (spec.family == ModelFamily::piecewise_affine) {
    const std::size_t p = static_cast<std::size_t>(spec.p);
    const std::size_t stride = p + 1;
    const int I = spec.num_pos_pieces;
    const int J = spec.num_neg_pieces;
    auto lse_block = [&](std::size_t base, int count, Vec& weights_out) {
      double m = -std::numeric_limits<double>::infinity();
      weights_out.resize(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i) {
        const double* piece = theta.data() + base + static_cast<std::size_t>(i) * stride;
        double v = piece[p];
        for (std::size_t d = 0; d < p; ++d) v += piece[d] * x[d];
        weights_out[static_cast<std::size_t>(i)] = v;
        m = std::max(m, v);
      }
      double s = 0.0;
      for (int i = 0; i < count; ++i) {
        double e = std::exp((weights_out[static_cast<std::size_t>(i)] - m) / eps);
        weights_out[static_cast<std::size_t>(i)] = e;
        s += e;
      }
      for (int i = 0; i < count; ++i) weights_out[static_cast<std::size_t>(i)] /= s;
      return m + eps * std::log(s);
    };
    thread_local Vec wg, wh;
    const std::size_t neg_base = static_cast<std::size_t>(I) * stride;
    const double g = lse_block(0, I, wg);
    const double h = lse_block(neg_base, J, wh);
    double sg, sh;
    const double outer = smooth_max2(g, h + y, eps, sg, sh);
    phi = 2.0 * outer - y;
    psi = g + h;
    for (int i = 0; i < I; ++i) {
      const std::size_t base = static_cast<std::size_t>(i) * stride;
      const double cg = wg[static_cast<std::size_t>(i)];
      for (std::size_t d = 0; d < p; ++d) {
        phi_grad[base + d] += 2.0 * sg * cg * x[d];
        psi_grad[base + d] += cg * x[d];
      }
      phi_grad[base + p] += 2.0 * sg * cg;
      psi_grad[base + p] += cg;
    }
    for (int j = 0; j < J; ++j) {
      const std::size_t base = neg_base + static_cast<std::size_t>(j) * stride;
      const double ch = wh[static_cast<std::size_t>(j)];
      for (std::size_t d = 0; d < p; ++d) {
        phi_grad[base + d] += 2.0 * sh * ch * x[d];
        psi_grad[base + d] += ch * x[d];
      }
      phi_grad[base + p] += 2.0 * sh * ch;
      psi_grad[base + p] += ch;
    }
    return;
  }

  Vec feat = linear_features(spec, x);
  const double r = dot(theta, feat) - y;
  double slope;
  switch (loss.kind) {
    case LossKind::absolute: {
      const double m = std::abs(r);
      phi = m + eps * std::log1p(std::exp(-2.0 * m / eps));
      slope = std::tanh(r / eps);
      break;
    }
    case LossKind::squared:
      phi = r * r;
      slope = 2.0 * r;
      break;
    case LossKind::huber:
      phi = eval_loss(loss, std::abs(r));
      slope = std::clamp(r, -loss.delta, loss.delta);
      break;
  }
  psi = 0.0;
  for (std::size_t j = 0; j < feat.size(); ++j) phi_grad[j] = slope * feat[j];
}

/// Smoothed model of the convex majorant minimized between linearizations:
///   F(theta, t) = [ (1-alpha) t + sum_i w_i smax(phi_i(theta) - t, psi_i(theta)) ]
///                 / (beta - alpha)  -  <sv, theta>.
/// Minimizing jointly over (theta, t) minimizes the trimmed convex half.
class SmoothSurrogate {
 public:
  SmoothSurrogate(const DataSet& data, const ModelSpec& spec, const LossSpec& loss,
                  TrimLevels levels, Vec sv, double eps)
      : data_(data), spec_(spec), loss_(loss), levels_(levels), sv_(std::move(sv)),
        eps_(eps) {}

  double operator()(const Vec& z, Vec& grad) const {
    const std::size_t q = z.size() - 1;
    thread_local ParamVector theta;
    theta.assign(z.begin(), z.end() - 1);
    const double t = z[q];
    grad.assign(q + 1, 0.0);
    const double inv = 1.0 / levels_.width();
    double acc = (1.0 - levels_.alpha) * t;
    double sigma_sum = 0.0;
    thread_local Vec pg, sg;
    double phi, psi;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      smooth_split(spec_, loss_, data_.xs[i], data_.ys[i], theta, eps_, phi, psi, pg, sg);
      double w1, w2;
      const double val = smooth_max2(phi - t, psi, eps_, w1, w2);
      const double w = data_.weights[i];
      acc += w * val;
      for (std::size_t j = 0; j < q; ++j) grad[j] += w * (w1 * pg[j] + w2 * sg[j]);
      sigma_sum += w * w1;
    }
    double value = inv * acc;
    for (std::size_t j = 0; j < q; ++j) {
      grad[j] = inv * grad[j] - sv_[j];
      value -= sv_[j] * theta[j];
    }
    grad[q] = inv * ((1.0 - levels_.alpha) - sigma_sum);
    return value;
  }

 private:
  const DataSet& data_;
  const ModelSpec& spec_;
  const LossSpec& loss_;
  TrimLevels levels_;
  Vec sv_;
  double eps_;
};

// ---- limited-memory BFGS -------------------------------------------------

template <class F>
std::pair<Vec, double> lbfgs_minimize(const F& fn, Vec z, int max_iters, double tol) {
  const std::size_t q = z.size();
  Vec grad(q), new_grad(q), dir(q), trial(q);
  double f = fn(z, grad);
  std::deque<Vec> ss, ys;
  std::deque<double> rhos;
  const std::size_t memory = 8;
  for (int it = 0; it < max_iters; ++it) {
    if (sup_norm(grad) <= tol * std::max(1.0, std::abs(f))) break;

    // two-loop recursion
    dir = grad;
    std::vector<double> alphas(ss.size());
    for (std::size_t k = ss.size(); k-- > 0;) {
      alphas[k] = rhos[k] * dot(ss[k], dir);
      for (std::size_t j = 0; j < q; ++j) dir[j] -= alphas[k] * ys[k][j];
    }
    if (!ss.empty()) {
      const double gamma = dot(ss.back(), ys.back()) / dot(ys.back(), ys.back());
      for (double& d : dir) d *= gamma;
    }
    for (std::size_t k = 0; k < ss.size(); ++k) {
      const double beta = rhos[k] * dot(ys[k], dir);
      for (std::size_t j = 0; j < q; ++j) dir[j] += (alphas[k] - beta) * ss[k][j];
    }
    for (double& d : dir) d = -d;
    double slope = dot(dir, grad);
    if (!(slope < 0.0)) {
      for (std::size_t j = 0; j < q; ++j) dir[j] = -grad[j];
      slope = -dot(grad, grad);
    }

    double step = ss.empty() ? std::min(1.0, 1.0 / std::max(1.0, sup_norm(grad))) : 1.0;
    double f_new = f;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t j = 0; j < q; ++j) trial[j] = z[j] + step * dir[j];
      f_new = fn(trial, new_grad);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;

    Vec s(q), yv(q);
    for (std::size_t j = 0; j < q; ++j) {
      s[j] = trial[j] - z[j];
      yv[j] = new_grad[j] - grad[j];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * norm2(s) * norm2(yv)) {
      ss.push_back(std::move(s));
      ys.push_back(std::move(yv));
      rhos.push_back(1.0 / sy);
      if (ss.size() > memory) {
        ss.pop_front();
        ys.pop_front();
        rhos.pop_front();
      }
    }
    z = trial;
    f = f_new;
    grad = new_grad;
  }
  return {std::move(z), f};
}

}  // namespace detail

/// Splits the trimmed objective at theta into convex halves
///   u = U_alpha / (beta - alpha),  v = U_beta / (beta - alpha),
/// where U_gamma ranks the pointwise losses and keeps the mass inside
/// (gamma, 1], plus the full-weight sum of the concave-side parts psi_i that
/// makes each half convex on its own.  Also returns the affine minorant of v
/// cut at theta from the maximizing rank assignment.
inline DcaParts dca_decomposition(const DataSet& data, const ModelSpec& spec,
                                  const LossSpec& loss, TrimLevels levels,
                                  const ParamVector& theta) {
  DcaParts parts;
  auto ua = detail::trimmed_sum(data, spec, loss, levels, levels.alpha, theta, false);
  auto ub = detail::trimmed_sum(data, spec, loss, levels, levels.beta, theta, true);
  parts.u = ua.value;
  parts.v = ub.value;
  parts.minorant.slope = std::move(ub.grad);
  parts.minorant.value = ub.value;
  parts.minorant.ref = theta;
  return parts;
}

namespace detail {

inline ParamVector ball_draw(Rng& rng, std::size_t q, double radius) {
  for (;;) {
    Vec dir = rng.gaussian(q);
    const double nrm = norm2(dir);
    if (nrm < 1e-12) continue;
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(q));
    for (double& d : dir) d *= r / nrm;
    return dir;
  }
}

inline RestartTrace run_restart(const DataSet& data, const ModelSpec& spec,
                                const LossSpec& loss, TrimLevels levels,
                                const SolveConfig& cfg, int restart_index) {
  const std::size_t q = param_count(spec);
  Rng rng(derive_seed(cfg.seed, {hash_tag("restart"), static_cast<std::uint64_t>(restart_index)}));
  RestartTrace out;
  out.theta = ball_draw(rng, q, cfg.init_scale);
  out.objective = objective(data, spec, loss, levels, out.theta);
  out.objectives.push_back(out.objective);
  out.termination = Termination::max_iters;

  auto exact_surrogate = [&](const ParamVector& th, const AffineMinorant& minorant) {
    auto u = trimmed_sum(data, spec, loss, levels, levels.alpha, th, false);
    return u.value - minorant(th);
  };

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    DcaParts parts = dca_decomposition(data, spec, loss, levels, out.theta);
    const double surr0 = parts.u - parts.v;
    const double t0 = var_at(loss_sample(data, spec, loss, out.theta), levels.alpha);

    ParamVector accepted;
    bool have_candidate = false;
    double obj_candidate = out.objective;

    if (cfg.smoothing_eps > 0.0) {
      const double eps_base = cfg.smoothing_eps * std::max(out.objective, 1e-9);
      for (int trial = 0; trial < 6 && !have_candidate; ++trial) {
        const double eps = eps_base / static_cast<double>(1 << trial);
        SmoothSurrogate model(data, spec, loss, levels, parts.minorant.slope, eps);
        Vec z0(q + 1);
        std::copy(out.theta.begin(), out.theta.end(), z0.begin());
        z0[q] = t0;
        auto [z, fz] = lbfgs_minimize(model, std::move(z0), cfg.inner_max_iters,
                                      cfg.inner_tol);
        (void)fz;
        ParamVector cand(z.begin(), z.end() - 1);
        if (!all_finite(cand)) continue;
        const double surr_c = exact_surrogate(cand, parts.minorant);
        if (!(surr_c < surr0)) continue;
        const double obj_c = objective(data, spec, loss, levels, cand);
        if (!std::isfinite(obj_c))
          throw NumericalError("non-finite objective in descent step", cand);
        if (obj_c <= out.objective) {
          accepted = std::move(cand);
          obj_candidate = obj_c;
          have_candidate = true;
        }
      }
    }

    if (!have_candidate) {
      // plain subgradient step on the exact majorant with backtracking
      auto u = trimmed_sum(data, spec, loss, levels, levels.alpha, out.theta, true);
      Vec dir(q);
      for (std::size_t j = 0; j < q; ++j)
        dir[j] = parts.minorant.slope[j] - u.grad[j];
      const double dn = norm2(dir);
      if (dn > 0.0) {
        double step = 1.0 / std::max(1.0, dn);
        for (int ls = 0; ls < 30 && !have_candidate; ++ls, step *= 0.5) {
          ParamVector cand(q);
          for (std::size_t j = 0; j < q; ++j) cand[j] = out.theta[j] + step * dir[j];
          if (exact_surrogate(cand, parts.minorant) < surr0) {
            const double obj_c = objective(data, spec, loss, levels, cand);
            if (std::isfinite(obj_c) && obj_c <= out.objective) {
              accepted = std::move(cand);
              obj_candidate = obj_c;
              have_candidate = true;
            }
          }
        }
      }
    }

    if (!have_candidate) {
      out.termination = Termination::tol_reached;
      break;
    }

    const double decrease = out.objective - obj_candidate;
    out.theta = std::move(accepted);
    out.objective = obj_candidate;
    out.objectives.push_back(out.objective);
    if (decrease / std::max(1.0, out.objectives[out.objectives.size() - 2]) <
        cfg.outer_tol) {
      out.termination = Termination::tol_reached;
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Multi-start minimization of the trimmed tail average over the model's
/// parameters.  Each restart draws its start uniformly from a ball of radius
/// init_scale using a stream derived from (seed, restart index), runs the
/// linearize-and-descend loop, and the best final objective wins.  Restarts
/// are independent, so `jobs` workers change wall time but never the result.
inline SolveReport fit_incvar(const DataSet& data, const ModelSpec& spec,
                              const LossSpec& loss, TrimLevels levels,
                              const SolveConfig& cfg, int jobs = 1) {
  cfg.validate();
  spec.validate();
  if (levels.width() < 1e-9)
    throw std::domain_error("fit_incvar: trim window beta - alpha must be >= 1e-9");
  if (data.dim() != static_cast<std::size_t>(spec.p))
    throw std::invalid_argument("fit_incvar: data dimension " + std::to_string(data.dim()) +
                                " does not match model input dimension " +
                                std::to_string(spec.p));
  if (!detail::dc_supported(spec, loss))
    throw UnsupportedError(std::string("fit_incvar: no convex split for ") +
                           family_name(spec.family) + " with " + loss_name(loss.kind) +
                           " loss");

  SolveReport report;
  report.restarts.resize(static_cast<std::size_t>(cfg.restarts));
  parallel_for(static_cast<std::size_t>(cfg.restarts), jobs, [&](std::size_t r) {
    report.restarts[r] =
        detail::run_restart(data, spec, loss, levels, cfg, static_cast<int>(r));
  });
  for (int r = 0; r < cfg.restarts; ++r) {
    const auto& rt = report.restarts[static_cast<std::size_t>(r)];
    if (rt.objective < report.best_objective) {
      report.best_objective = rt.objective;
      report.best_theta = rt.theta;
      report.best_restart = r;
      report.termination = rt.termination;
    }
  }
  return report;
}

}  // namespace incvar
