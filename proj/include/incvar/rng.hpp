#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <utility>

#include "common.hpp"

namespace incvar {

/// 64-bit finalizer of the splitmix64 generator.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// FNV-1a hash, used to turn scenario and estimator names into stream tags.
inline std::uint64_t hash_tag(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Folds stream identifiers into a base seed.  Restarts, sweep cells and
/// generators each get their own identifier list, which makes every stream
/// reproducible independently of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (std::uint64_t t : tags) s = mix64(s ^ mix64(t));
  return s;
}

/// Deterministic random source (splitmix64 stream).  The standard library
/// distributions are implementation defined, so the uniform/normal transforms
/// live here and seeded runs produce the same bytes on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x853c49e6748fea9bull)) {}

  std::uint64_t u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  std::uint64_t below(std::uint64_t n) { return u64() % n; }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  Vec gaussian(std::size_t n) {
    Vec v(n);
    for (double& x : v) x = normal();
    return v;
  }

  /// Uniform on the closed unit disk.
  std::pair<double, double> unit_disk() {
    double r = std::sqrt(uniform());
    double phi = 2.0 * kPi * uniform();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::uint64_t state_;
};

}  // namespace incvar
