#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "losses.hpp"
#include "rng.hpp"

namespace incvar {

enum class ModelFamily {
  linear,
  piecewise_affine,
  polynomial,
  exponential,
  logarithmic,
  power,
  feedforward_nn
};

inline const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::linear: return "linear";
    case ModelFamily::piecewise_affine: return "piecewise_affine";
    case ModelFamily::polynomial: return "polynomial";
    case ModelFamily::exponential: return "exponential";
    case ModelFamily::logarithmic: return "logarithmic";
    case ModelFamily::power: return "power";
    case ModelFamily::feedforward_nn: return "feedforward_nn";
  }
  return "?";
}

enum class Activation { relu, leaky_relu, identity };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::identity: return "identity";
  }
  return "?";
}

/// Parameters are handed around as one flat array; the layout per family is
/// published by param_layout below.
using ParamVector = Vec;

/// Regression family descriptor.  `p` is the input dimension; the remaining
/// fields apply only to the families that read them.
struct ModelSpec {
  ModelFamily family = ModelFamily::linear;
  int p = 1;
  int num_pos_pieces = 0;          // piecewise_affine: pieces in the positive max
  int num_neg_pieces = 0;          // piecewise_affine: pieces in the subtracted max
  int degree = 0;                  // polynomial: total degree bound
  std::vector<int> widths;         // feedforward_nn: layer widths, last must be 1
  Activation activation = Activation::relu;
  double leaky_slope = 0.01;
  double coeff_floor = 1e-6;       // exponential/power: lower bound on the scale

  static ModelSpec linear(int p) { return checked(make(ModelFamily::linear, p)); }
  static ModelSpec piecewise_affine(int p, int pos, int neg) {
    ModelSpec s = make(ModelFamily::piecewise_affine, p);
    s.num_pos_pieces = pos;
    s.num_neg_pieces = neg;
    s.validate();
    return s;
  }
  static ModelSpec polynomial(int p, int degree) {
    ModelSpec s = make(ModelFamily::polynomial, p);
    s.degree = degree;
    s.validate();
    return s;
  }
  static ModelSpec exponential(int p) { return checked(make(ModelFamily::exponential, p)); }
  static ModelSpec logarithmic(int p) { return checked(make(ModelFamily::logarithmic, p)); }
  static ModelSpec power_law(int p) { return checked(make(ModelFamily::power, p)); }
  static ModelSpec feedforward(int p, std::vector<int> widths,
                               Activation act = Activation::relu,
                               double leaky_slope = 0.01) {
    ModelSpec s = make(ModelFamily::feedforward_nn, p);
    s.widths = std::move(widths);
    s.activation = act;
    s.leaky_slope = leaky_slope;
    s.validate();
    return s;
  }

  void validate() const {
    if (p <= 0) throw std::domain_error("ModelSpec: input dimension must be positive");
    switch (family) {
      case ModelFamily::piecewise_affine:
        if (num_pos_pieces <= 0 || num_neg_pieces <= 0)
          throw std::domain_error("ModelSpec: piecewise_affine needs pieces on both sides");
        break;
      case ModelFamily::polynomial:
        if (degree < 0) throw std::domain_error("ModelSpec: polynomial degree must be >= 0");
        break;
      case ModelFamily::exponential:
      case ModelFamily::power:
        if (!(coeff_floor > 0.0))
          throw std::domain_error("ModelSpec: scale floor must be > 0");
        break;
      case ModelFamily::feedforward_nn:
        if (widths.empty() || widths.back() != 1)
          throw std::domain_error("ModelSpec: widths must end in an output of 1");
        for (int w : widths)
          if (w <= 0) throw std::domain_error("ModelSpec: widths must be positive");
        if (activation == Activation::leaky_relu && !(leaky_slope > 0.0))
          throw std::domain_error("ModelSpec: leaky slope must be > 0");
        break;
      default:
        break;
    }
  }

 private:
  static ModelSpec make(ModelFamily f, int p) {
    ModelSpec s;
    s.family = f;
    s.p = p;
    return s;
  }

  static ModelSpec checked(ModelSpec s) {
    s.validate();
    return s;
  }
};

namespace detail {

inline std::size_t binomial(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Exponent tuples of all monomials in p variables with total degree up to
/// `degree`, ordered by total degree and lexicographically inside a degree.
inline const std::vector<std::vector<int>>& poly_exponents(int p, int degree) {
  static std::map<std::pair<int, int>, std::unique_ptr<std::vector<std::vector<int>>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{p, degree}];
  if (!slot) {
    auto out = std::make_unique<std::vector<std::vector<int>>>();
    std::vector<int> e(static_cast<std::size_t>(p), 0);
    for (int d = 0; d <= degree; ++d) {
      // lexicographic ascent over tuples summing to d
      auto rec = [&](auto&& self, int pos, int left) -> void {
        if (pos == p - 1) {
          e[static_cast<std::size_t>(pos)] = left;
          out->push_back(e);
          return;
        }
        for (int v = 0; v <= left; ++v) {
          e[static_cast<std::size_t>(pos)] = v;
          self(self, pos + 1, left - v);
        }
      };
      rec(rec, 0, d);
    }
    slot = std::move(out);
  }
  return *slot;
}

}  // namespace detail

inline std::size_t param_count(const ModelSpec& spec) {
  const std::size_t p = static_cast<std::size_t>(spec.p);
  switch (spec.family) {
    case ModelFamily::linear:
    case ModelFamily::exponential:
    case ModelFamily::logarithmic:
    case ModelFamily::power:
      return p + 1;
    case ModelFamily::piecewise_affine:
      return static_cast<std::size_t>(spec.num_pos_pieces + spec.num_neg_pieces) * (p + 1);
    case ModelFamily::polynomial:
      return detail::binomial(static_cast<std::size_t>(spec.degree) + p, p);
    case ModelFamily::feedforward_nn: {
      std::size_t total = 0;
      std::size_t prev = p;
      for (int w : spec.widths) {
        total += static_cast<std::size_t>(w) * (prev + 1);
        prev = static_cast<std::size_t>(w);
      }
      return total;
    }
  }
  return 0;
}

/// Named slice of the flat parameter array.
struct ParamBlock {
  std::string name;
  std::size_t offset;
  std::size_t size;
};

inline std::vector<ParamBlock> param_layout(const ModelSpec& spec) {
  const std::size_t p = static_cast<std::size_t>(spec.p);
  std::vector<ParamBlock> blocks;
  switch (spec.family) {
    case ModelFamily::linear:
      blocks.push_back({"slope", 0, p});
      blocks.push_back({"intercept", p, 1});
      break;
    case ModelFamily::exponential:
      blocks.push_back({"scale", 0, 1});
      blocks.push_back({"rate", 1, p});
      break;
    case ModelFamily::logarithmic:
      blocks.push_back({"offset", 0, 1});
      blocks.push_back({"log_coefficients", 1, p});
      break;
    case ModelFamily::power:
      blocks.push_back({"scale", 0, 1});
      blocks.push_back({"exponents", 1, p});
      break;
    case ModelFamily::polynomial:
      blocks.push_back({"coefficients", 0, param_count(spec)});
      break;
    case ModelFamily::piecewise_affine: {
      std::size_t stride = p + 1;
      for (int i = 0; i < spec.num_pos_pieces; ++i)
        blocks.push_back({"pos_piece_" + std::to_string(i),
                          static_cast<std::size_t>(i) * stride, stride});
      for (int j = 0; j < spec.num_neg_pieces; ++j)
        blocks.push_back({"neg_piece_" + std::to_string(j),
                          (static_cast<std::size_t>(spec.num_pos_pieces) +
                           static_cast<std::size_t>(j)) * stride,
                          stride});
      break;
    }
    case ModelFamily::feedforward_nn: {
      std::size_t off = 0;
      std::size_t prev = p;
      for (std::size_t l = 0; l < spec.widths.size(); ++l) {
        std::size_t w = static_cast<std::size_t>(spec.widths[l]);
        blocks.push_back({"weights_" + std::to_string(l + 1), off, w * prev});
        off += w * prev;
        blocks.push_back({"bias_" + std::to_string(l + 1), off, w});
        off += w;
        prev = w;
      }
      break;
    }
  }
  return blocks;
}

/// Length and finiteness check plus the scale floor for exponential/power.
inline void validate_params(const ModelSpec& spec, const ParamVector& theta) {
  if (theta.size() != param_count(spec))
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) +
                                " entries, " + family_name(spec.family) + " expects " +
                                std::to_string(param_count(spec)));
  if (!all_finite(theta))
    throw std::domain_error("parameter vector must be finite");
  if ((spec.family == ModelFamily::exponential || spec.family == ModelFamily::power) &&
      theta[0] < spec.coeff_floor)
    throw std::domain_error("scale parameter " + format_g17(theta[0]) +
                            " is below the floor " + format_g17(spec.coeff_floor));
}

namespace detail {

inline void check_shapes(const ModelSpec& spec, const ParamVector& theta, const Vec& x) {
  if (theta.size() != param_count(spec))
    throw std::invalid_argument("parameter vector has " + std::to_string(theta.size()) +
                                " entries, " + family_name(spec.family) + " expects " +
                                std::to_string(param_count(spec)));
  if (x.size() != static_cast<std::size_t>(spec.p))
    throw std::invalid_argument("input has " + std::to_string(x.size()) +
                                " coordinates, expected " + std::to_string(spec.p));
}

struct PiecewiseEval {
  double value;
  int arg_pos;       // first maximizing piece of the positive max
  int arg_neg;
  double pos_val;
  double neg_val;
};

inline PiecewiseEval piecewise_eval(const ModelSpec& spec, const ParamVector& theta,
                                    const Vec& x) {
  const std::size_t p = static_cast<std::size_t>(spec.p);
  const std::size_t stride = p + 1;
  auto max_over = [&](std::size_t base, int count, int& argmax) {
    double best = -std::numeric_limits<double>::infinity();
    argmax = 0;
    for (int i = 0; i < count; ++i) {
      const double* piece = theta.data() + base + static_cast<std::size_t>(i) * stride;
      double v = piece[p];
      for (std::size_t d = 0; d < p; ++d) v += piece[d] * x[d];
      if (v > best) {
        best = v;
        argmax = i;
      }
    }
    return best;
  };
  PiecewiseEval ev;
  ev.pos_val = max_over(0, spec.num_pos_pieces, ev.arg_pos);
  ev.neg_val = max_over(static_cast<std::size_t>(spec.num_pos_pieces) * stride,
                        spec.num_neg_pieces, ev.arg_neg);
  ev.value = ev.pos_val - ev.neg_val;
  return ev;
}

inline double activate(const ModelSpec& spec, double z) {
  switch (spec.activation) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? z : spec.leaky_slope * z;
    case Activation::identity: return z;
  }
  return z;
}

/// Forward pass.  With `reparam` set, each layer-l weight is warped by
/// sign(c)|c|^(1/L) and each bias by sign(d)|d|^(l/L) before use, which makes
/// the map positively homogeneous of degree one in the warped parameters.
inline double nn_forward(const ModelSpec& spec, const ParamVector& params, const Vec& x,
                         bool reparam) {
  const std::size_t L = spec.widths.size();
  Vec cur = x;
  std::size_t off = 0;
  std::size_t prev = static_cast<std::size_t>(spec.p);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t w = static_cast<std::size_t>(spec.widths[l]);
    const double weight_exp = 1.0 / static_cast<double>(L);
    const double bias_exp = static_cast<double>(l + 1) / static_cast<double>(L);
    Vec next(w);
    for (std::size_t r = 0; r < w; ++r) {
      double z = 0.0;
      for (std::size_t c = 0; c < prev; ++c) {
        double a = params[off + r * prev + c];
        z += (reparam ? signed_pow(a, weight_exp) : a) * cur[c];
      }
      double b = params[off + w * prev + r];
      z += reparam ? signed_pow(b, bias_exp) : b;
      next[r] = activate(spec, z);
    }
    off += w * prev + w;
    prev = w;
    cur = std::move(next);
  }
  return cur[0];
}

/// Feature vector of the families that are linear in their parameters,
/// ordered to match param_layout.
inline Vec linear_features(const ModelSpec& spec, const Vec& x) {
  const std::size_t p = static_cast<std::size_t>(spec.p);
  switch (spec.family) {
    case ModelFamily::linear: {
      Vec f(p + 1);
      for (std::size_t d = 0; d < p; ++d) f[d] = x[d];
      f[p] = 1.0;
      return f;
    }
    case ModelFamily::logarithmic: {
      Vec f(p + 1);
      f[0] = 1.0;
      for (std::size_t d = 0; d < p; ++d) {
        if (!(x[d] > 0.0))
          throw std::domain_error("logarithmic model needs strictly positive inputs");
        f[d + 1] = std::log(x[d]);
      }
      return f;
    }
    case ModelFamily::polynomial: {
      const auto& exps = poly_exponents(spec.p, spec.degree);
      Vec f(exps.size());
      for (std::size_t m = 0; m < exps.size(); ++m) {
        double term = 1.0;
        for (std::size_t d = 0; d < p; ++d)
          for (int rep = 0; rep < exps[m][d]; ++rep) term *= x[d];
        f[m] = term;
      }
      return f;
    }
    default:
      throw UnsupportedError(std::string("no linear feature map for ") +
                             family_name(spec.family));
  }
}

}  // namespace detail

inline double predict(const ModelSpec& spec, const ParamVector& theta, const Vec& x) {
  detail::check_shapes(spec, theta, x);
  const std::size_t p = static_cast<std::size_t>(spec.p);
  switch (spec.family) {
    case ModelFamily::linear: {
      double v = theta[p];
      for (std::size_t d = 0; d < p; ++d) v += theta[d] * x[d];
      return v;
    }
    case ModelFamily::piecewise_affine:
      return detail::piecewise_eval(spec, theta, x).value;
    case ModelFamily::polynomial:
      return dot(theta, detail::linear_features(spec, x));
    case ModelFamily::exponential: {
      double z = 0.0;
      for (std::size_t d = 0; d < p; ++d) z += theta[d + 1] * x[d];
      return theta[0] * std::exp(z);
    }
    case ModelFamily::logarithmic:
      return dot(theta, detail::linear_features(spec, x));
    case ModelFamily::power: {
      double v = theta[0];
      for (std::size_t d = 0; d < p; ++d) {
        if (!(x[d] > 0.0))
          throw std::domain_error("power model needs strictly positive inputs");
        v *= std::pow(x[d], theta[d + 1]);
      }
      return v;
    }
    case ModelFamily::feedforward_nn:
      return detail::nn_forward(spec, theta, x, false);
  }
  return 0.0;
}

inline constexpr double kHomogeneityTol = 1e-9;

/// Outcome of probing f(x, a*theta) = a*f(x, theta) over sampled scales and
/// inputs.  Deviations are normalized by max(1, |a*f(x, theta)|).
struct HomogeneityReport {
  bool pass = true;
  double max_deviation = 0.0;
  double witness_scale = std::numeric_limits<double>::quiet_NaN();
  Vec witness_x;
};

inline HomogeneityReport check_positive_homogeneity(const ModelSpec& spec,
                                                    const ParamVector& theta,
                                                    const Vec& scales,
                                                    const std::vector<Vec>& xs) {
  for (double a : scales)
    if (!std::isfinite(a) || a < 0.0)
      throw std::domain_error("check_positive_homogeneity: scales must be >= 0");
  HomogeneityReport rep;
  for (const Vec& x : xs) {
    const double base = predict(spec, theta, x);
    for (double a : scales) {
      ParamVector scaled(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) scaled[i] = a * theta[i];
      const double lhs = predict(spec, scaled, x);
      const double target = a * base;
      const double dev = std::abs(lhs - target) / std::max(1.0, std::abs(target));
      if (dev > rep.max_deviation) {
        rep.max_deviation = dev;
        rep.witness_scale = a;
        rep.witness_x = x;
      }
    }
  }
  rep.pass = rep.max_deviation <= kHomogeneityTol;
  return rep;
}

/// Monte-Carlo lower bound on the largest mass the data puts near the zero set
/// of the model over unit-norm directions.  Directions are Gaussian samples
/// normalized to the unit sphere; for families with a constrained scale the
/// sample is first projected onto the feasible cone, and an all-zero
/// projection is redrawn.
struct ConditionEstimate {
  double estimate = 0.0;
  Vec direction;
  int directions_used = 0;
};

inline ConditionEstimate probabilistic_condition_estimate(
    const ModelSpec& spec, const std::vector<Vec>& xs, const Vec& weights, double delta,
    int num_dirs, std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::domain_error("probabilistic_condition_estimate: delta must be > 0");
  if (num_dirs <= 0) throw std::domain_error("probabilistic_condition_estimate: need num_dirs > 0");
  if (xs.empty()) throw std::domain_error("probabilistic_condition_estimate: no data");
  Vec w = weights;
  if (w.empty()) w.assign(xs.size(), 1.0 / static_cast<double>(xs.size()));
  if (w.size() != xs.size())
    throw std::invalid_argument("probabilistic_condition_estimate: weight count mismatch");

  const bool cone_constrained =
      spec.family == ModelFamily::exponential || spec.family == ModelFamily::power;
  const std::size_t q = param_count(spec);
  Rng rng(derive_seed(seed, {hash_tag("condition_estimate")}));
  ConditionEstimate best;
  int drawn = 0;
  long attempts = 0;
  const long max_attempts = 100L * num_dirs + 100;
  while (drawn < num_dirs && attempts < max_attempts) {
    ++attempts;
    Vec theta = rng.gaussian(q);
    if (cone_constrained) theta[0] = std::max(theta[0], 0.0);
    double nrm = norm2(theta);
    if (nrm < 1e-12) continue;
    for (double& t : theta) t /= nrm;
    ++drawn;
    double mass = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (std::abs(predict(spec, theta, xs[i])) < delta) mass += w[i];
    if (mass > best.estimate) {
      best.estimate = mass;
      best.direction = theta;
    }
  }
  best.directions_used = drawn;
  return best;
}

/// Convex split of the pointwise loss theta -> L(|f(x, theta) - y|) as
/// phi - psi with both parts convex, together with subgradients at theta.
struct DcEval {
  double phi = 0.0;
  double psi = 0.0;
  Vec phi_grad;
  Vec psi_grad;
};

namespace detail {

inline bool dc_supported(const ModelSpec& spec, const LossSpec& loss) {
  switch (spec.family) {
    case ModelFamily::linear:
    case ModelFamily::polynomial:
    case ModelFamily::logarithmic:
      return true;
    case ModelFamily::piecewise_affine:
      return loss.kind == LossKind::absolute;
    default:
      return false;
  }
}

}  // namespace detail

inline DcEval dc_components(const ModelSpec& spec, const LossSpec& loss, const Vec& x,
                            double y, const ParamVector& theta) {
  detail::check_shapes(spec, theta, x);
  if (!detail::dc_supported(spec, loss))
    throw UnsupportedError(std::string("dc_components: no convex split for ") +
                           family_name(spec.family) + " with " + loss_name(loss.kind) +
                           " loss");
  DcEval ev;
  const std::size_t q = theta.size();
  if (spec.family == ModelFamily::piecewise_affine) {
    // |g - h - y| = 2 max(g, h + y) - (g + h + y); the constant y is folded
    // into phi so the loss is exactly phi - psi.
    const std::size_t p = static_cast<std::size_t>(spec.p);
    const std::size_t stride = p + 1;
    auto pe = detail::piecewise_eval(spec, theta, x);
    ev.phi = 2.0 * std::max(pe.pos_val, pe.neg_val + y) - y;
    ev.psi = pe.pos_val + pe.neg_val;
    ev.phi_grad.assign(q, 0.0);
    ev.psi_grad.assign(q, 0.0);
    const std::size_t pos_base = static_cast<std::size_t>(pe.arg_pos) * stride;
    const std::size_t neg_base =
        (static_cast<std::size_t>(spec.num_pos_pieces) + static_cast<std::size_t>(pe.arg_neg)) *
        stride;
    auto add_piece_grad = [&](Vec& grad, std::size_t base, double scale) {
      for (std::size_t d = 0; d < p; ++d) grad[base + d] += scale * x[d];
      grad[base + p] += scale;
    };
    if (pe.pos_val >= pe.neg_val + y)
      add_piece_grad(ev.phi_grad, pos_base, 2.0);
    else
      add_piece_grad(ev.phi_grad, neg_base, 2.0);
    add_piece_grad(ev.psi_grad, pos_base, 1.0);
    add_piece_grad(ev.psi_grad, neg_base, 1.0);
    return ev;
  }

  // Families linear in theta: the composed loss is convex, so psi vanishes.
  Vec feat = detail::linear_features(spec, x);
  const double r = dot(theta, feat) - y;
  const double t = std::abs(r);
  ev.phi = eval_loss(loss, t);
  ev.psi = 0.0;
  const double slope = loss_slope(loss, t) * (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0));
  ev.phi_grad.resize(q);
  for (std::size_t i = 0; i < q; ++i) ev.phi_grad[i] = slope * feat[i];
  ev.psi_grad.assign(q, 0.0);
  return ev;
}

namespace detail {

inline void require_homogeneous_activation(const ModelSpec& spec) {
  switch (spec.activation) {
    case Activation::relu:
    case Activation::leaky_relu:
    case Activation::identity:
      return;
  }
  throw UnsupportedError("nn_reparam: activation is not positively homogeneous");
}

inline ParamVector nn_warp(const ModelSpec& spec, const ParamVector& theta,
                           bool forward) {
  if (spec.family != ModelFamily::feedforward_nn)
    throw UnsupportedError("nn_reparam: model is not a feedforward network");
  require_homogeneous_activation(spec);
  if (theta.size() != param_count(spec))
    throw std::invalid_argument("nn_reparam: parameter vector has wrong length");
  const double L = static_cast<double>(spec.widths.size());
  ParamVector out(theta.size());
  std::size_t off = 0;
  std::size_t prev = static_cast<std::size_t>(spec.p);
  for (std::size_t l = 0; l < spec.widths.size(); ++l) {
    const std::size_t w = static_cast<std::size_t>(spec.widths[l]);
    const double layer = static_cast<double>(l + 1);
    const double we = forward ? L : 1.0 / L;
    const double be = forward ? L / layer : layer / L;
    for (std::size_t i = 0; i < w * prev; ++i) out[off + i] = signed_pow(theta[off + i], we);
    for (std::size_t i = 0; i < w; ++i)
      out[off + w * prev + i] = signed_pow(theta[off + w * prev + i], be);
    off += w * prev + w;
    prev = w;
  }
  return out;
}

}  // namespace detail

/// Warps network parameters so that the warped forward pass (reparam_predict)
/// reproduces the plain network and is positively homogeneous of degree one:
/// weight entries are raised to the power L, layer-l biases to L/l.
inline ParamVector nn_reparam(const ModelSpec& spec, const ParamVector& theta) {
  return detail::nn_warp(spec, theta, true);
}

/// Inverse warp; nn_reparam_inverse(nn_reparam(theta)) recovers theta.
inline ParamVector nn_reparam_inverse(const ModelSpec& spec, const ParamVector& c) {
  return detail::nn_warp(spec, c, false);
}

/// Evaluates the warped network: reparam_predict(spec, nn_reparam(theta), x)
/// equals predict(spec, theta, x), and scaling the warped parameters by any
/// a >= 0 scales the output by a.
inline double reparam_predict(const ModelSpec& spec, const ParamVector& c, const Vec& x) {
  if (spec.family != ModelFamily::feedforward_nn)
    throw UnsupportedError("reparam_predict: model is not a feedforward network");
  detail::require_homogeneous_activation(spec);
  detail::check_shapes(spec, c, x);
  return detail::nn_forward(spec, c, x, true);
}

}  // namespace incvar
