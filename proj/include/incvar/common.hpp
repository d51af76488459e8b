#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace incvar {

inline constexpr const char* kVersion = "0.1.0";

using Vec = std::vector<double>;

/// Raised when a model family / loss pairing or an operation mode has no
/// implementation, as opposed to bad numeric input.
class UnsupportedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative routine produces a non-finite quantity.  Carries
/// the parameter vector that triggered the failure so callers can report or
/// skip the offending fit.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, Vec theta)
      : std::runtime_error(what), theta_(std::move(theta)) {}
  const Vec& theta() const noexcept { return theta_; }

 private:
  Vec theta_;
};

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double sup_norm(const Vec& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// Compensated summation; keeps weight totals accurate enough that
/// renormalized masses stay within 1e-12 of one even for large samples.
inline double kahan_sum(const Vec& v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    double y = x - c;
    double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

/// sign(x) * |x|^e, with 0 mapped to 0.
inline double signed_pow(double x, double e) {
  if (x == 0.0) return 0.0;
  return x > 0.0 ? std::pow(x, e) : -std::pow(-x, e);
}

/// Runs fn(i) for i in [0, n).  With jobs > 1 indices are pulled from a shared
/// counter by worker threads; each fn(i) must write only to its own slot so
/// results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failed.load()) std::rethrow_exception(first_error);
}

/// 17 significant digits: enough that the printed text parses back to the
/// identical double.
inline std::string format_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace incvar
