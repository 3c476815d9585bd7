#pragma once

#include <cmath>
#include <cstdint>

#include "cbm/errors.hpp"

namespace cbm {

/// Conditional vote-margin statistics of one group: with S = 2B - n,
/// B ~ Binomial(n, p),
///   sign_expectation = P(S > 0) - P(S <= 0)   (a tie votes nay),
///   abs_expectation  = E|S| = E[S * chi(S)].
struct BinomialMarginStats {
  double sign_expectation = 0.0;
  double abs_expectation = 0.0;
};

/// Tail sums via the pmf recurrence started at the mode, which never
/// underflows; sums are renormalized by the accumulated total. Above
/// n = 5000 the recurrence runs in log space.
inline BinomialMarginStats binomial_margin_stats(std::int64_t n, double p) {
  if (n < 0) throw ValidationError("binomial_margin_stats: n must be >= 0");
  if (p < 0.0) p = 0.0;
  if (p > 1.0) p = 1.0;
  if (n == 0) return {-1.0, 0.0};
  if (p == 0.0) return {-1.0, static_cast<double>(n)};
  if (p == 1.0) return {1.0, static_cast<double>(n)};

  const double q = 1.0 - p;
  std::int64_t mode = static_cast<std::int64_t>(std::floor((n + 1) * p));
  if (mode > n) mode = n;
  const double log_pmf_mode =
      std::lgamma(static_cast<double>(n + 1)) -
      std::lgamma(static_cast<double>(mode + 1)) -
      std::lgamma(static_cast<double>(n - mode + 1)) + mode * std::log(p) +
      (n - mode) * std::log(q);
  const bool log_space = n > 5000;

  double total = 0.0, abs_sum = 0.0, pos_sum = 0.0;
  auto accumulate = [&](std::int64_t k, double pmf) {
    const double margin = static_cast<double>(2 * k - n);
    total += pmf;
    abs_sum += std::abs(margin) * pmf;
    if (margin > 0.0) pos_sum += pmf;
  };

  if (!log_space) {
    double pmf = std::exp(log_pmf_mode);
    accumulate(mode, pmf);
    double down = pmf;
    for (std::int64_t k = mode; k > 0; --k) {
      down *= (static_cast<double>(k) * q) /
              (static_cast<double>(n - k + 1) * p);
      accumulate(k - 1, down);
    }
    double up = pmf;
    for (std::int64_t k = mode; k < n; ++k) {
      up *= (static_cast<double>(n - k) * p) / (static_cast<double>(k + 1) * q);
      accumulate(k + 1, up);
    }
  } else {
    const double lp = std::log(p), lq = std::log(q);
    double lg = log_pmf_mode;
    accumulate(mode, std::exp(lg));
    for (std::int64_t k = mode; k > 0; --k) {
      lg += std::log(static_cast<double>(k)) + lq -
            std::log(static_cast<double>(n - k + 1)) - lp;
      accumulate(k - 1, std::exp(lg));
    }
    lg = log_pmf_mode;
    for (std::int64_t k = mode; k < n; ++k) {
      lg += std::log(static_cast<double>(n - k)) + lp -
            std::log(static_cast<double>(k + 1)) - lq;
      accumulate(k + 1, std::exp(lg));
    }
  }

  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericalError("binomial_margin_stats: pmf sum degenerate");
  return {2.0 * pos_sum / total - 1.0, abs_sum / total};
}

}  // namespace cbm
