#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace incvar {

/// Uniform empirical distribution: mass 1/n on each stored point.
struct EmpiricalCloud {
  std::vector<Vec> points;

  void validate() const {
    if (points.empty()) throw std::domain_error("EmpiricalCloud: no points");
    const std::size_t d = points.front().size();
    if (d == 0) throw std::domain_error("EmpiricalCloud: zero-dimensional points");
    for (const auto& pt : points) {
      if (pt.size() != d)
        throw std::domain_error("EmpiricalCloud: inconsistent point dimensions");
      if (!all_finite(pt))
        throw std::domain_error("EmpiricalCloud: non-finite coordinate");
    }
  }

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

/// Witness that two clouds are within Prokhorov radius `radius`: a partial
/// matching whose pairs are all within `radius` of each other and whose
/// leftover mass is at most `radius`.
struct CouplingCertificate {
  double radius = 0.0;
  std::vector<int> matching;      // matching[i] = partner index in q, or -1
  double unmatched_fraction = 0.0;
};

namespace detail {

inline double euclidean(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// Maximum bipartite matching (augmenting paths) on the graph whose edges are
/// point pairs at distance <= eps.  Deterministic: vertices are scanned in
/// index order.
class ThresholdMatcher {
 public:
  ThresholdMatcher(const EmpiricalCloud& p, const EmpiricalCloud& q)
      : n_(p.size()), dist_(n_ * n_) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        dist_[i * n_ + j] = euclidean(p.points[i], q.points[j]);
  }

  const std::vector<double>& distances() const { return dist_; }

  int max_matching(double eps, std::vector<int>& match_left) const {
    match_left.assign(n_, -1);
    std::vector<int> match_right(n_, -1);
    std::vector<char> visited(n_);
    int matched = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      std::fill(visited.begin(), visited.end(), 0);
      if (augment(i, eps, visited, match_left, match_right)) ++matched;
    }
    return matched;
  }

 private:
  bool augment(std::size_t i, double eps, std::vector<char>& visited,
               std::vector<int>& match_left, std::vector<int>& match_right) const {
    for (std::size_t j = 0; j < n_; ++j) {
      if (visited[j] || dist_[i * n_ + j] > eps + 1e-12) continue;
      visited[j] = 1;
      if (match_right[j] < 0 ||
          augment(static_cast<std::size_t>(match_right[j]), eps, visited, match_left,
                  match_right)) {
        match_left[i] = static_cast<int>(j);
        match_right[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  }

  std::size_t n_;
  std::vector<double> dist_;
};

}  // namespace detail

/// Prokhorov distance between equal-size uniform clouds.  The optimum is the
/// smallest eps in {pairwise distances} . {k/n} for which a maximum matching
/// on pairs within eps leaves at most eps*n points unmatched; feasibility is
/// monotone in eps, so a bisection over the sorted candidates is exact.
inline std::pair<double, CouplingCertificate> prokhorov_distance(
    const EmpiricalCloud& p, const EmpiricalCloud& q) {
  p.validate();
  q.validate();
  if (p.size() != q.size())
    throw UnsupportedError("prokhorov_distance: clouds must have equal sizes (got " +
                           std::to_string(p.size()) + " and " + std::to_string(q.size()) +
                           ")");
  if (p.dim() != q.dim())
    throw std::invalid_argument("prokhorov_distance: dimension mismatch");

  const std::size_t n = p.size();
  detail::ThresholdMatcher matcher(p, q);

  Vec candidates;
  candidates.reserve(n * n + n + 1);
  for (double d : matcher.distances())
    if (d <= 1.0) candidates.push_back(d);
  for (std::size_t k = 0; k <= n; ++k)
    candidates.push_back(static_cast<double>(k) / static_cast<double>(n));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<int> matching;
  auto feasible = [&](double eps) {
    const int m = matcher.max_matching(eps, matching);
    return static_cast<double>(n - static_cast<std::size_t>(m)) <=
           eps * static_cast<double>(n) + 1e-9;
  };

  std::size_t lo = 0, hi = candidates.size() - 1;   // eps = 1 is always feasible
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible(candidates[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }

  CouplingCertificate cert;
  cert.radius = candidates[lo];
  const int m = matcher.max_matching(cert.radius, matching);
  cert.matching = std::move(matching);
  cert.unmatched_fraction =
      static_cast<double>(n - static_cast<std::size_t>(m)) / static_cast<double>(n);
  return {cert.radius, cert};
}

/// True iff the two clouds are within Prokhorov distance `claimed` (up to the
/// certificate tolerance).
inline bool strassen_bound_check(const EmpiricalCloud& p, const EmpiricalCloud& q,
                                 double claimed) {
  return prokhorov_distance(p, q).first <= claimed + 1e-12;
}

namespace detail {

/// Smallest eps with sup_x [F(x) - G(x + eps)] <= eps for the step CDFs of
/// two sorted samples.  The sup as a function of eps is nonincreasing and
/// piecewise constant with breakpoints at the pairwise gaps y_j - x_i, so the
/// crossing with the diagonal lands either on a breakpoint or on the constant
/// value of the preceding piece.
inline double levy_one_sided(const Vec& xs, const Vec& ys) {
  const double nx = static_cast<double>(xs.size());
  const double ny = static_cast<double>(ys.size());

  // F(x) - G(x + eps) = (cf * ny - cg * nx) / (nx * ny); the numerator is an
  // exact integer, so one division keeps the gap correct to half an ulp.
  auto gap = [&](std::ptrdiff_t cf, std::ptrdiff_t cg) {
    return (static_cast<double>(cf) * ny - static_cast<double>(cg) * nx) /
           (nx * ny);
  };

  auto sup_gap = [&](double eps) {
    double best = 0.0;   // value of F - G(. + eps) left of both supports
    for (double x : xs) {
      const auto cf = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
      const auto cg = std::upper_bound(ys.begin(), ys.end(), x + eps) - ys.begin();
      best = std::max(best, gap(cf, cg));
    }
    for (double y : ys) {
      const auto cf = std::lower_bound(xs.begin(), xs.end(), y - eps) - xs.begin();
      const auto cg = std::lower_bound(ys.begin(), ys.end(), y) - ys.begin();
      best = std::max(best, gap(cf, cg));
    }
    return best;
  };

  Vec eps_candidates{0.0, 1.0};
  for (double y : ys)
    for (double x : xs) {
      const double d = y - x;
      if (d > 0.0 && d < 1.0) eps_candidates.push_back(d);
    }
  std::sort(eps_candidates.begin(), eps_candidates.end());
  eps_candidates.erase(std::unique(eps_candidates.begin(), eps_candidates.end()),
                       eps_candidates.end());

  auto feasible = [&](std::size_t k) {
    return sup_gap(eps_candidates[k]) <= eps_candidates[k] + 1e-12;
  };

  std::size_t lo = 0, hi = eps_candidates.size() - 1;   // sup_gap(1) <= 1 always
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  if (lo == 0) return eps_candidates[0];
  const double plateau = sup_gap(eps_candidates[lo - 1]);
  return std::min(eps_candidates[lo], std::max(eps_candidates[lo - 1], plateau));
}

}  // namespace detail

/// Levy distance between the empirical CDFs of two real samples: the width of
/// the narrowest 45-degree band around one CDF containing the other.
inline double levy_distance(Vec f_points, Vec g_points) {
  if (f_points.empty() || g_points.empty())
    throw std::domain_error("levy_distance: empty sample");
  if (!all_finite(f_points) || !all_finite(g_points))
    throw std::domain_error("levy_distance: non-finite sample value");
  std::sort(f_points.begin(), f_points.end());
  std::sort(g_points.begin(), g_points.end());
  return std::max(detail::levy_one_sided(f_points, g_points),
                  detail::levy_one_sided(g_points, f_points));
}

}  // namespace incvar
