#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "losses.hpp"
#include "models.hpp"
#include "riskcore.hpp"

namespace incvar {

/// Weighted regression sample.  Weights follow the same contract as
/// WeightedLossSample: strictly positive, total mass one, renormalized when the
/// raw total is within 1e-9 of one.
struct DataSet {
  std::vector<Vec> xs;
  Vec ys;
  Vec weights;

  static DataSet weighted(std::vector<Vec> xs, Vec ys, Vec weights) {
    DataSet d;
    d.xs = std::move(xs);
    d.ys = std::move(ys);
    d.weights = std::move(weights);
    d.validate();
    return d;
  }

  static DataSet uniform(std::vector<Vec> xs, Vec ys) {
    Vec w(xs.size(), xs.empty() ? 1.0 : 1.0 / static_cast<double>(xs.size()));
    return weighted(std::move(xs), std::move(ys), std::move(w));
  }

  void validate() {
    if (xs.empty()) throw std::domain_error("DataSet: empty sample");
    if (ys.size() != xs.size() || weights.size() != xs.size())
      throw std::invalid_argument("DataSet: xs/ys/weights length mismatch");
    const std::size_t d = xs.front().size();
    if (d == 0) throw std::domain_error("DataSet: zero-dimensional inputs");
    for (const Vec& x : xs) {
      if (x.size() != d) throw std::invalid_argument("DataSet: ragged input rows");
      if (!all_finite(x)) throw std::domain_error("DataSet: inputs must be finite");
    }
    for (double y : ys)
      if (!std::isfinite(y)) throw std::domain_error("DataSet: targets must be finite");
    for (double w : weights)
      if (!std::isfinite(w) || !(w > 0.0))
        throw std::domain_error("DataSet: weights must be strictly positive");
    double total = kahan_sum(weights);
    if (std::abs(total - 1.0) > 1e-9)
      throw std::domain_error("DataSet: weights sum to " + format_g17(total) +
                              ", expected 1 within 1e-9");
    if (total != 1.0)
      for (double& w : weights) w /= total;
  }

  std::size_t size() const noexcept { return xs.size(); }
  std::size_t dim() const noexcept { return xs.empty() ? 0 : xs.front().size(); }
};

/// Mixture (1-eps)*d0 + eps*g of two samples over the same input space.
inline DataSet mixture(const DataSet& d0, const DataSet& g, double eps) {
  if (!std::isfinite(eps) || eps < 0.0 || eps > 1.0)
    throw std::domain_error("mixture: eps must lie in [0, 1]");
  if (d0.dim() != g.dim())
    throw std::invalid_argument("mixture: input dimensions differ");
  DataSet out;
  auto append = [&](const DataSet& part, double mass) {
    for (std::size_t i = 0; i < part.size(); ++i) {
      out.xs.push_back(part.xs[i]);
      out.ys.push_back(part.ys[i]);
      out.weights.push_back(part.weights[i] * mass);
    }
  };
  if (eps < 1.0) append(d0, 1.0 - eps);
  if (eps > 0.0) append(g, eps);
  out.validate();
  return out;
}

/// Pointwise losses of a parameter on a sample, as a loss law.  Non-finite
/// predictions surface as a numerical failure carrying theta.
inline WeightedLossSample loss_sample(const DataSet& data, const ModelSpec& spec,
                                      const LossSpec& loss, const ParamVector& theta) {
  Vec values(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double f = predict(spec, theta, data.xs[i]);
    const double t = std::abs(f - data.ys[i]);
    if (!std::isfinite(t))
      throw NumericalError("non-finite residual at data point " + std::to_string(i), theta);
    const double l = eval_loss(loss, t);
    if (!std::isfinite(l))
      throw NumericalError("non-finite loss at data point " + std::to_string(i), theta);
    values[i] = l;
  }
  return WeightedLossSample(std::move(values), data.weights);
}

inline ConditionEstimate probabilistic_condition_estimate(const ModelSpec& spec,
                                                          const DataSet& data,
                                                          double delta, int num_dirs,
                                                          std::uint64_t seed) {
  return probabilistic_condition_estimate(spec, data.xs, data.weights, delta, num_dirs,
                                          seed);
}

}  // namespace incvar
