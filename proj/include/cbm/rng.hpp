#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cbm {

/// Deterministic random generator (xoshiro256++ seeded through splitmix64)
/// with the handful of samplers the Monte Carlo paths need. Every consumer
/// owns its generator; sampling never touches hidden global state, so a
/// fixed (seed, stream) pair reproduces draws bit for bit on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  /// Generator for stream `index` of a run seeded with `seed`. Streams are
  /// pairwise independent for practical purposes and fully deterministic.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(seed ^ (0x9E3779B97F4A7C15ull * (index + 1)));
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform draw in (0, 1]; used where log() or pow(., 1/a) needs x > 0.
  double uniform01_open_low() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Marsaglia's polar method (spare value cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  /// Gamma(shape, 1) via Marsaglia–Tsang; boosting handles shape < 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform01_open_low();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01_open_low();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Binomial(n, p) by inversion. The mass is consumed center-out from the
  /// mode, which keeps the walk short (O(sqrt(n p q)) expected) and avoids
  /// the q^n underflow of a bottom-up scan. Any fixed ordering of the mass
  /// yields exact Binomial(n, p) marginals.
  std::int64_t binomial(std::int64_t n, double p) {
    if (n <= 0) return 0;
    if (p <= 0.0) return 0;
    if (p >= 1.0) return n;
    const double q = 1.0 - p;
    std::int64_t mode = static_cast<std::int64_t>(std::floor((n + 1) * p));
    if (mode > n) mode = n;
    const double log_pmf_mode = std::lgamma(static_cast<double>(n + 1)) -
                                std::lgamma(static_cast<double>(mode + 1)) -
                                std::lgamma(static_cast<double>(n - mode + 1)) +
                                mode * std::log(p) + (n - mode) * std::log(q);
    const double u = uniform01();
    double acc = std::exp(log_pmf_mode);
    if (u < acc) return mode;
    std::int64_t lo = mode, hi = mode;
    double pmf_lo = std::exp(log_pmf_mode), pmf_hi = pmf_lo;
    while (lo > 0 || hi < n) {
      if (hi < n) {
        pmf_hi *= (static_cast<double>(n - hi) * p) /
                  (static_cast<double>(hi + 1) * q);
        ++hi;
        acc += pmf_hi;
        if (u < acc) return hi;
      }
      if (lo > 0) {
        pmf_lo *= (static_cast<double>(lo) * q) /
                  (static_cast<double>(n - lo + 1) * p);
        --lo;
        acc += pmf_lo;
        if (u < acc) return lo;
      }
    }
    // u landed in the last 1-ulp sliver of accumulated rounding; return the
    // heavier boundary.
    return p > 0.5 ? n : 0;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cbm
