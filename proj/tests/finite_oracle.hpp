#pragma once

// Brute-force oracle for the finite-population moments: enumerate all 2^N
// voter configurations, compute each configuration's probability from first
// principles (per-voter conditional probabilities multiplied out and
// integrated over the bias hierarchy) and accumulate the moments from the
// enumeration. Deliberately avoids the binomial recurrences and the
// factorized cross moments used by the implementation under test.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cbm/kernel.hpp"
#include "cbm/measure.hpp"
#include "cbm/model.hpp"
#include "cbm/quadrature.hpp"
#include "cbm/rng.hpp"
#include "testutil.hpp"

namespace testutil {

struct EnumeratedMoments {
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  double s = 0.0;
  double total_probability = 0.0;
};

inline EnumeratedMoments enumerate_moments(
    const cbm::CbmSpec& spec, const std::vector<std::int64_t>& sizes,
    const cbm::GaussLegendre& rule) {
  const int m = spec.groups;
  int total = 0;
  for (auto n : sizes) total += static_cast<int>(n);

  std::vector<double> cuts;
  for (const auto& k : spec.kernels)
    for (double c : k.moment_breakpoints()) cuts.push_back(c);
  const auto outer = discretize(spec.mu, rule, cuts);

  // inner[z][lambda][k]: probability of one fixed configuration with k ayes
  // in group lambda, conditionally on z
  std::vector<std::vector<std::vector<double>>> inner(outer.size());
  for (std::size_t zi = 0; zi < outer.size(); ++zi) {
    inner[zi].resize(m);
    for (int lambda = 0; lambda < m; ++lambda) {
      const int n = static_cast<int>(sizes[lambda]);
      inner[zi][lambda].assign(n + 1, 0.0);
      for (const auto& tn :
           spec.kernel(lambda).inner_nodes(outer[zi].x, rule)) {
        const double p = 0.5 * (1.0 + std::clamp(tn.x, -1.0, 1.0));
        double ppow = 1.0;
        for (int k = 0; k <= n; ++k) {
          inner[zi][lambda][k] +=
              tn.w * ppow * std::pow(1.0 - p, static_cast<double>(n - k));
          ppow *= p;
        }
      }
    }
  }

  EnumeratedMoments out;
  out.a.assign(m, std::vector<double>(m, 0.0));
  out.b.assign(m, 0.0);
  std::vector<int> ayes(m), chi(m);
  for (std::uint64_t config = 0; config < (1ull << total); ++config) {
    int bit = 0;
    for (int lambda = 0; lambda < m; ++lambda) {
      int k = 0;
      for (int i = 0; i < sizes[lambda]; ++i, ++bit)
        if (config & (1ull << bit)) ++k;
      ayes[lambda] = k;
    }
    double prob = 0.0;
    for (std::size_t zi = 0; zi < outer.size(); ++zi) {
      double prod = 1.0;
      for (int lambda = 0; lambda < m; ++lambda)
        prod *= inner[zi][lambda][ayes[lambda]];
      prob += outer[zi].w * prod;
    }
    double margin_total = 0.0;
    for (int lambda = 0; lambda < m; ++lambda) {
      const double margin =
          2.0 * ayes[lambda] - static_cast<double>(sizes[lambda]);
      chi[lambda] = margin > 0.0 ? 1 : -1;
      margin_total += margin;
    }
    const double scaled = margin_total / total;
    for (int i = 0; i < m; ++i) {
      out.b[i] += prob * scaled * chi[i];
      for (int j = 0; j < m; ++j) out.a[i][j] += prob * chi[i] * chi[j];
    }
    out.s += prob * scaled * scaled;
    out.total_probability += prob;
  }
  return out;
}

/// Random valid model with small symmetric measures, cycling through the
/// kernel families.
inline cbm::CbmSpec random_small_spec(cbm::Rng& rng, int m) {
  using cbm::BiasKernel;
  using cbm::Measure;
  std::vector<double> alpha(m, 1.0 / m);
  alpha.back() = 1.0 - std::accumulate(alpha.begin(), alpha.end() - 1, 0.0);
  for (;;) {
    Measure mu = rng.uniform01() < 0.5
                     ? random_symmetric_discrete(rng, 2, 0.4)
                     : random_symmetric_uniform_mixture(rng, 1, 0.4);
    BiasKernel kernel = [&]() {
      const double pick = rng.uniform01();
      if (pick < 0.4)
        return BiasKernel::additive(
            rng.uniform01() < 0.5
                ? random_symmetric_discrete(rng, 2, 0.4)
                : random_symmetric_uniform_mixture(rng, 1, 0.4));
      if (pick < 0.7)
        return BiasKernel::multiplicative(Measure::uniform(
            -0.2 - 0.3 * rng.uniform01(), 0.3 + 0.4 * rng.uniform01()));
      return BiasKernel::constant(random_symmetric_discrete(rng, 2, 0.5));
    }();
    try {
      auto spec = cbm::CbmSpec::make(mu, {kernel}, m, alpha);
      cbm::require_valid_dynamics(spec);
      return spec;
    } catch (const cbm::Error&) {
      continue;
    }
  }
}

}  // namespace testutil
