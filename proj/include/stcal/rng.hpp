#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

#include "stcal/math_util.hpp"

namespace stcal {

// Deterministic RNG wrapper. std::mt19937_64 is bit-exact by the standard; the
// distributions here are hand-written so results do not depend on the standard
// library implementation.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  // Independent stream derived from (seed, stream); used for per-iteration RANSAC
  // streams and per-run ablation seeds.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed) ^ mix(stream * 0x9E3779B97F4A7C15ULL + 0x3C6EF372FE94F82AULL));
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller (no hidden distribution state).
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

  // Uniform index in [0, n), rejection sampled (no modulo bias).
  std::size_t index(std::size_t n) {
    const std::uint64_t span = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= span) v = engine_();
    return static_cast<std::size_t>(v % n);
  }

  Eigen::Vector3d unit_vector() {
    while (true) {
      Eigen::Vector3d v(gauss(), gauss(), gauss());
      const double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace stcal
