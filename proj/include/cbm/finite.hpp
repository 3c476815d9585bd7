#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "cbm/binomial.hpp"
#include "cbm/errors.hpp"
#include "cbm/linalg.hpp"
#include "cbm/model.hpp"
#include "cbm/quadrature.hpp"
#include "cbm/rng.hpp"

namespace cbm {

inline constexpr std::int64_t kMaxExactGroupSize = 10000;
inline constexpr int kDefaultMcStreams = 16;

/// Finite-population moment system A_N w = b_N with s_N = E[(S/N)^2],
/// computed exactly or by Monte Carlo (then with standard errors).
struct FiniteMoments {
  enum class Method { Exact, MonteCarlo };

  explicit FiniteMoments(int m)
      : a_matrix(m), b(m, 0.0), stderr_a(m), stderr_b(m, 0.0) {}

  SymMatrix a_matrix;
  std::vector<double> b;
  double s = 0.0;
  Method method = Method::Exact;
  SymMatrix stderr_a;
  std::vector<double> stderr_b;
  double stderr_s = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> sizes;
};

namespace detail {

inline void check_sizes(const CbmSpec& spec,
                        const std::vector<std::int64_t>& sizes,
                        std::int64_t max_size) {
  if (sizes.size() != static_cast<std::size_t>(spec.groups))
    throw ValidationError("sizes: need one entry per group");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1)
      throw ValidationError("sizes[" + std::to_string(i) + "]: must be >= 1");
    if (sizes[i] > max_size)
      throw ValidationError("sizes[" + std::to_string(i) +
                            "]: exceeds the exact-computation guard of " +
                            std::to_string(max_size));
  }
}

inline double clamp_bias(double t) { return std::clamp(t, -1.0, 1.0); }

}  // namespace detail

/// Exact finite-N moments. Given the global bias z the groups decouple, so
/// cross moments factor into per-group conditional expectations, each an
/// integral of binomial margin statistics over rho^z; the outer average over
/// mu reuses the measure quadrature.
inline FiniteMoments exact_moments(const CbmSpec& spec,
                                   const std::vector<std::int64_t>& sizes,
                                   const GaussLegendre& rule) {
  detail::check_sizes(spec, sizes, kMaxExactGroupSize);
  require_valid_dynamics(spec);
  const int m = spec.groups;
  double n_total = 0.0;
  for (auto n : sizes) n_total += static_cast<double>(n);

  std::vector<double> cuts;
  for (const auto& k : spec.kernels)
    for (double c : k.moment_breakpoints()) cuts.push_back(c);
  const auto outer = discretize(spec.mu, rule, cuts);

  FiniteMoments out(m);
  out.method = FiniteMoments::Method::Exact;
  out.sizes = sizes;

  std::vector<double> chi(m), abs_margin(m), mean_margin(m), sq_margin(m);
  for (const auto& zn : outer) {
    for (int lambda = 0; lambda < m; ++lambda) {
      const auto inner = spec.kernel(lambda).inner_nodes(zn.x, rule);
      const double n_l = static_cast<double>(sizes[lambda]);
      double c = 0.0, u = 0.0, m1 = 0.0, m2 = 0.0;
      for (const auto& tn : inner) {
        const double t = detail::clamp_bias(tn.x);
        const auto stats =
            binomial_margin_stats(sizes[lambda], 0.5 * (1.0 + t));
        c += tn.w * stats.sign_expectation;
        u += tn.w * stats.abs_expectation;
        m1 += tn.w * t;
        m2 += tn.w * t * t;
      }
      chi[lambda] = c;
      abs_margin[lambda] = u;
      mean_margin[lambda] = n_l * m1;
      sq_margin[lambda] = n_l * (1.0 - m2) + n_l * n_l * m2;
    }
    double margin_sum = 0.0, margin_sq_sum = 0.0, sq_sum = 0.0;
    for (int i = 0; i < m; ++i) {
      margin_sum += mean_margin[i];
      margin_sq_sum += mean_margin[i] * mean_margin[i];
      sq_sum += sq_margin[i];
    }
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const double v = zn.w * chi[i] * chi[j];
        out.a_matrix.at(i, j) += v;
        out.a_matrix.at(j, i) += v;
      }
      out.b[i] += zn.w *
                  (abs_margin[i] + chi[i] * (margin_sum - mean_margin[i])) /
                  n_total;
    }
    out.s += zn.w * (sq_sum + margin_sum * margin_sum - margin_sq_sum) /
             (n_total * n_total);
  }
  for (int i = 0; i < m; ++i) out.a_matrix.at(i, i) = 1.0;
  return out;
}

namespace detail {

struct McAccumulator {
  explicit McAccumulator(int m)
      : pair_sum(static_cast<std::size_t>(m) * m, 0.0),
        b_sum(m, 0.0),
        b_sq(m, 0.0) {}
  std::vector<double> pair_sum;
  std::vector<double> b_sum, b_sq;
  double s_sum = 0.0, s_sq = 0.0;
  std::uint64_t unanimous = 0;
  std::uint64_t count = 0;

  void merge(const McAccumulator& o) {
    for (std::size_t i = 0; i < pair_sum.size(); ++i) pair_sum[i] += o.pair_sum[i];
    for (std::size_t i = 0; i < b_sum.size(); ++i) {
      b_sum[i] += o.b_sum[i];
      b_sq[i] += o.b_sq[i];
    }
    s_sum += o.s_sum;
    s_sq += o.s_sq;
    unanimous += o.unanimous;
    count += o.count;
  }
};

/// One Monte Carlo stream: draw z ~ mu, t_l ~ rho^z, then the margin
/// directly as 2 Binomial(N_l, (1+t)/2) - N_l.
inline McAccumulator run_stream(const CbmSpec& spec,
                                const std::vector<std::int64_t>& sizes,
                                std::uint64_t n_samples, std::uint64_t seed,
                                std::uint64_t stream_index) {
  const int m = spec.groups;
  McAccumulator acc(m);
  Rng rng = Rng::stream(seed, stream_index);
  double n_total = 0.0;
  for (auto n : sizes) n_total += static_cast<double>(n);
  std::vector<int> chi(m);
  for (std::uint64_t it = 0; it < n_samples; ++it) {
    const double z = spec.mu.sample(rng);
    double margin_total = 0.0;
    for (int lambda = 0; lambda < m; ++lambda) {
      const double t = clamp_bias(spec.kernel(lambda).sample_t(z, rng));
      const std::int64_t ayes = rng.binomial(sizes[lambda], 0.5 * (1.0 + t));
      const std::int64_t margin = 2 * ayes - sizes[lambda];
      chi[lambda] = margin > 0 ? 1 : -1;
      margin_total += static_cast<double>(margin);
    }
    const double scaled = margin_total / n_total;
    bool unanimous = true;
    for (int i = 0; i < m; ++i) {
      if (chi[i] != chi[0]) unanimous = false;
      const double bx = scaled * chi[i];
      acc.b_sum[i] += bx;
      acc.b_sq[i] += bx * bx;
      for (int j = i + 1; j < m; ++j)
        acc.pair_sum[static_cast<std::size_t>(i) * m + j] +=
            static_cast<double>(chi[i] * chi[j]);
    }
    acc.s_sum += scaled * scaled;
    acc.s_sq += scaled * scaled * scaled * scaled;
    if (unanimous) ++acc.unanimous;
    ++acc.count;
  }
  return acc;
}

/// Streams are seeded independently and merged in index order, so the result
/// depends only on (seed, stream count), never on scheduling.
inline McAccumulator run_streams(const CbmSpec& spec,
                                 const std::vector<std::int64_t>& sizes,
                                 std::uint64_t samples, std::uint64_t seed,
                                 int streams) {
  if (streams < 1) throw ValidationError("streams: must be >= 1");
  std::vector<McAccumulator> parts;
  parts.reserve(streams);
  for (int i = 0; i < streams; ++i) parts.emplace_back(spec.groups);
  const std::uint64_t base = samples / streams;
  const std::uint64_t extra = samples % streams;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<std::uint64_t>(hw, streams));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < streams; i += workers) {
          const std::uint64_t n =
              base + (static_cast<std::uint64_t>(i) < extra ? 1 : 0);
          parts[i] = run_stream(spec, sizes, n, seed, i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  McAccumulator total(spec.groups);
  for (const auto& p : parts) total.merge(p);
  return total;
}

}  // namespace detail

/// Monte Carlo estimate of the finite-N moments with standard errors.
/// Deterministic for fixed (seed, streams).
inline FiniteMoments mc_moments(const CbmSpec& spec,
                                const std::vector<std::int64_t>& sizes,
                                std::uint64_t samples, std::uint64_t seed,
                                int streams = kDefaultMcStreams) {
  detail::check_sizes(spec, sizes, std::numeric_limits<std::int64_t>::max());
  if (samples < 1000)
    throw ValidationError("samples: Monte Carlo needs at least 1000 samples");
  require_valid_dynamics(spec);
  const int m = spec.groups;
  const auto acc = detail::run_streams(spec, sizes, samples, seed, streams);
  const double n = static_cast<double>(acc.count);

  FiniteMoments out(m);
  out.method = FiniteMoments::Method::MonteCarlo;
  out.samples = acc.count;
  out.seed = seed;
  out.sizes = sizes;
  for (int i = 0; i < m; ++i) {
    out.a_matrix.at(i, i) = 1.0;
    for (int j = i + 1; j < m; ++j) {
      const double mean = acc.pair_sum[static_cast<std::size_t>(i) * m + j] / n;
      out.a_matrix.at(i, j) = mean;
      out.a_matrix.at(j, i) = mean;
      // chi_i chi_j is ±1, so Var = 1 - mean^2
      const double se = std::sqrt(std::max(0.0, 1.0 - mean * mean) / n);
      out.stderr_a.at(i, j) = se;
      out.stderr_a.at(j, i) = se;
    }
    const double bm = acc.b_sum[i] / n;
    out.b[i] = bm;
    out.stderr_b[i] =
        std::sqrt(std::max(0.0, acc.b_sq[i] / n - bm * bm) / n);
  }
  const double sm = acc.s_sum / n;
  out.s = sm;
  out.stderr_s = std::sqrt(std::max(0.0, acc.s_sq / n - sm * sm) / n);
  return out;
}

/// Optimal finite-N weights and the democracy deficit they attain.
struct FiniteWeights {
  std::vector<double> weights;
  std::vector<double> normalised;
  double delta_n = 0.0;
};

inline FiniteWeights finite_weights(const FiniteMoments& moments) {
  FiniteWeights out;
  try {
    out.weights = spd_solve(moments.a_matrix, moments.b);
  } catch (const SingularOrIndefinite& e) {
    throw DegeneracyError(
        std::string("finite_weights: moment matrix is not positive definite (") +
        e.what() + "; smallest eigenvalue ~ " +
        std::to_string(min_eigen_estimate(moments.a_matrix)) +
        "), model is at or near tight correlation");
  }
  double sum = 0.0, wb = 0.0, waw = 0.0;
  const auto aw = moments.a_matrix.multiply(out.weights);
  for (std::size_t i = 0; i < out.weights.size(); ++i) {
    sum += out.weights[i];
    wb += out.weights[i] * moments.b[i];
    waw += out.weights[i] * aw[i];
  }
  out.delta_n = moments.s - 2.0 * wb + waw;
  out.normalised.resize(out.weights.size(), 0.0);
  if (sum != 0.0)
    for (std::size_t i = 0; i < out.weights.size(); ++i)
      out.normalised[i] = out.weights[i] / sum;
  return out;
}

/// Monte Carlo estimate of P(all groups vote alike). A single group is
/// unanimous with itself, so M = 1 returns exactly 1.
struct UnanimityEstimate {
  double probability = 0.0;
  double stderr_value = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

inline UnanimityEstimate unanimity_probability(
    const CbmSpec& spec, const std::vector<std::int64_t>& sizes,
    std::uint64_t samples, std::uint64_t seed,
    int streams = kDefaultMcStreams) {
  detail::check_sizes(spec, sizes, std::numeric_limits<std::int64_t>::max());
  require_valid_dynamics(spec);
  if (spec.groups == 1) return {1.0, 0.0, 0, seed};
  if (samples < 1000)
    throw ValidationError("samples: Monte Carlo needs at least 1000 samples");
  const auto acc = detail::run_streams(spec, sizes, samples, seed, streams);
  const double n = static_cast<double>(acc.count);
  const double p = static_cast<double>(acc.unanimous) / n;
  return {p, std::sqrt(std::max(0.0, p * (1.0 - p)) / n), acc.count, seed};
}

}  // namespace cbm
