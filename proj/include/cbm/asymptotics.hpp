#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "cbm/errors.hpp"
#include "cbm/kernel.hpp"
#include "cbm/linalg.hpp"
#include "cbm/model.hpp"
#include "cbm/quadrature.hpp"

namespace cbm {

/// 1 - a below this threshold counts as tight correlation. Sits three
/// orders of magnitude above the quadrature error floor, so genuinely tight
/// models and near-tight continuous ones separate cleanly.
inline constexpr double kTightTol = 1e-9;

/// The averaged kernel characteristics that drive every large-population
/// formula, plus the limit s of E[(S/N)^2].
struct AsymptoticSummary {
  double a = 0.0;         // <d^2>: inter-group vote correlation
  double mean_m1d = 0.0;  // <m1 d>
  double mean_om1 = 0.0;  // <om1>
  double mean_m2 = 0.0;   // <m2>
  double mean_m1sq = 0.0; // <m1^2>
  double s = 0.0;         // sum alpha^2 (<m2> - <m1^2>) + <m1^2>
};

namespace detail {

inline std::vector<double> combined_breakpoints(const CbmSpec& spec) {
  std::vector<double> cuts;
  for (const auto& k : spec.kernels)
    for (double c : k.moment_breakpoints()) cuts.push_back(c);
  return cuts;
}

inline std::vector<double> normalise_or_zero(std::span<const double> w,
                                             double sum) {
  std::vector<double> out(w.size(), 0.0);
  if (sum != 0.0)
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] / sum;
  return out;
}

}  // namespace detail

/// Averages of the kernel moments over the global bias (shared kernel).
inline AsymptoticSummary summarize(const CbmSpec& spec,
                                   const GaussLegendre& rule) {
  if (!spec.shared_kernel())
    throw ValidationError(
        "summarize: heterogeneous kernels are handled by hetero_solve");
  require_valid_dynamics(spec);
  const auto& k = spec.kernels.front();
  const auto nodes = discretize(spec.mu, rule, k.moment_breakpoints());
  AsymptoticSummary out;
  for (const auto& n : nodes) {
    const KernelMoments km = k.moments_at(n.x, rule);
    out.a += n.w * km.d * km.d;
    out.mean_m1d += n.w * km.m1 * km.d;
    out.mean_om1 += n.w * km.om1;
    out.mean_m2 += n.w * km.m2;
    out.mean_m1sq += n.w * km.m1 * km.m1;
  }
  out.a = std::clamp(out.a, 0.0, 1.0);
  double alpha_sq = 0.0;
  for (double al : spec.alpha) alpha_sq += al * al;
  out.s = alpha_sq * (out.mean_m2 - out.mean_m1sq) + out.mean_m1sq;
  return out;
}

/// Limit of the council covariance matrix: unit diagonal, a elsewhere.
inline SymMatrix limit_matrix(double a, int m) {
  if (a < -1e-12 || a > 1.0 + 1e-12)
    throw ValidationError("limit_matrix: a must lie in [0, 1]");
  SymMatrix out(m, a);
  for (int i = 0; i < m; ++i) out.at(i, i) = 1.0;
  return out;
}

/// Closed-form inverse of limit_matrix: ((1+(M-2)a) on the diagonal, -a off,
/// all over D = (1-a)(1+(M-1)a). Fails for tight correlation.
inline SymMatrix invert_limit_matrix(double a, int m) {
  if (a >= 1.0 - kTightTol)
    throw DegeneracyError(
        "invert_limit_matrix: matrix is singular at tight correlation (a = " +
        std::to_string(a) + ")");
  if (a < -1e-12) throw ValidationError("invert_limit_matrix: a must be >= 0");
  const double d = (1.0 - a) * (1.0 + (m - 1) * a);
  SymMatrix out(m, -a / d);
  for (int i = 0; i < m; ++i) out.at(i, i) = (1.0 + (m - 2) * a) / d;
  return out;
}

/// Optimal asymptotic weights w = C1 alpha + C2 and derived quantities.
struct WeightSolution {
  double c1 = 0.0;
  double c2 = 0.0;
  double a = 0.0;
  std::vector<double> weights;
  std::vector<double> normalised;
  double sum_w = 0.0;
  double delta_inf = 0.0;
  double d1 = 0.0;  // minimal deficit = d1 * sum alpha^2 + d2
  double d2 = 0.0;
};

/// Limit democracy deficit s - 2 (w, b) + (w, A w) at arbitrary weights.
inline double limit_deficit(const AsymptoticSummary& s,
                            std::span<const double> alpha,
                            std::span<const double> w) {
  const int m = static_cast<int>(alpha.size());
  const double coef = s.mean_om1 - s.mean_m1d;
  double wb = 0.0, sum_w = 0.0;
  for (int i = 0; i < m; ++i) {
    wb += w[i] * (coef * alpha[i] + s.mean_m1d);
    sum_w += w[i];
  }
  double wsq = 0.0;
  for (int i = 0; i < m; ++i) wsq += w[i] * w[i];
  const double waw = (1.0 - s.a) * wsq + s.a * sum_w * sum_w;
  return s.s - 2.0 * wb + waw;
}

inline WeightSolution asymptotic_weights(const AsymptoticSummary& s,
                                         std::span<const double> alpha) {
  if (s.a >= 1.0 - kTightTol)
    throw DegeneracyError(
        "asymptotic_weights: model is tightly correlated (a = " +
        std::to_string(s.a) + "); the optimum is the sum constraint handled by "
        "tight_weights");
  const int m = static_cast<int>(alpha.size());
  WeightSolution out;
  out.a = s.a;
  out.c1 = (s.mean_om1 - s.mean_m1d) / (1.0 - s.a);
  out.c2 = (s.mean_m1d - s.a * s.mean_om1) /
           ((1.0 - s.a) * (1.0 + (m - 1) * s.a));
  out.weights.resize(m);
  for (int i = 0; i < m; ++i) out.weights[i] = out.c1 * alpha[i] + out.c2;
  out.sum_w = (s.mean_om1 + (m - 1) * s.mean_m1d) / (1.0 + (m - 1) * s.a);
  out.normalised = detail::normalise_or_zero(out.weights, out.sum_w);
  out.delta_inf = limit_deficit(s, alpha, out.weights);
  // minimal deficit split into a sum(alpha^2)-proportional and a constant part
  const double mr = s.mean_om1 - s.mean_m1d;
  out.d1 = (s.mean_m2 - s.mean_m1sq) - out.c1 * mr;
  out.d2 = s.mean_m1sq - out.c1 * s.mean_m1d - out.c2 * mr -
           out.c2 * s.mean_m1d * m;
  return out;
}

/// Tight correlation: rho^z concentrates on one side of 0 for mu-almost all
/// z. Exact for the discrete part of mu; continuous parts are checked at
/// every quadrature node together with 1 - a < tol.
inline bool is_tightly_correlated(const CbmSpec& spec,
                                  const GaussLegendre& rule,
                                  double tol = kTightTol) {
  auto one_sided = [&](const BiasKernel& k, double z) {
    if (!k.measure_backed()) return false;  // beta laws straddle 0
    const Measure local = k.local_measure(z);
    const double total = local.total_mass();
    return local.mass(IntervalQuery::open_closed(0.0, 1.0)) >= total - 1e-12 ||
           local.mass(IntervalQuery::closed_open(-1.0, 0.0)) >= total - 1e-12;
  };
  const bool has_continuous = !spec.mu.uniform_pieces().empty() ||
                              !spec.mu.power_pieces().empty();
  for (const auto& k : spec.kernels) {
    for (const auto& node : discretize(spec.mu, rule, k.moment_breakpoints()))
      if (!one_sided(k, node.x)) return false;
    if (has_continuous) {
      double a = 0.0;
      for (const auto& node :
           discretize(spec.mu, rule, k.moment_breakpoints())) {
        const double d = k.moments_at(node.x, rule).d;
        a += node.w * d * d;
      }
      if (1.0 - a >= tol) return false;
    }
  }
  return true;
}

/// Asymptotically optimal weights under tight correlation: only the sum
/// sum_w = <om1> is pinned down; the equal split is returned as the
/// canonical representative.
struct TightSolution {
  std::vector<double> weights;
  double sum_w = 0.0;
  double delta_inf = 0.0;
};

inline TightSolution tight_weights(const AsymptoticSummary& s, int m) {
  TightSolution out;
  out.sum_w = s.mean_om1;
  out.weights.assign(m, s.mean_om1 / m);
  // at a = 1 the deficit depends on the weights only through their sum
  out.delta_inf = s.s - s.mean_om1 * s.mean_om1;
  return out;
}

/// A function continuous away from 0 with finite one-sided limits there.
struct PiecewiseFn {
  std::function<double(double)> f;
  double at0plus = 0.0;
  double at0minus = 0.0;
};

/// Limit of E[f_1(S_1/N) ... f_M(S_M/N)]: the product over groups of
///   I_z(f) = \int_{t != 0} f(alpha t) rho^z(dt) + (f(0+) + f(0-))/2 rho^z{0},
/// averaged over the global bias.
inline double limit_functional(const CbmSpec& spec,
                               std::span<const PiecewiseFn> fs,
                               const GaussLegendre& rule) {
  if (static_cast<int>(fs.size()) != spec.groups)
    throw ValidationError("limit_functional: need one function per group");
  const auto outer =
      discretize(spec.mu, rule, detail::combined_breakpoints(spec));
  double total = 0.0;
  for (const auto& zn : outer) {
    double prod = 1.0;
    for (int lambda = 0; lambda < spec.groups; ++lambda) {
      const auto& pf = fs[lambda];
      double iz = 0.0;
      for (const auto& tn : spec.kernel(lambda).inner_nodes(zn.x, rule)) {
        if (tn.atom && tn.x == 0.0)
          iz += tn.w * 0.5 * (pf.at0plus + pf.at0minus);
        else
          iz += tn.w * pf.f(spec.alpha[lambda] * tn.x);
      }
      prod *= iz;
    }
    total += zn.w * prod;
  }
  return total;
}

/// Large-population optimality system for per-group kernels:
/// A has unit diagonal and <d(rho_l) d(rho_n)> off it; b collects the
/// intra/inter cohesion terms; w solves A w = b.
struct HeteroSolution {
  SymMatrix a_matrix;
  std::vector<double> b;
  double s = 0.0;
  std::vector<double> weights;
  std::vector<double> normalised;
  double sum_w = 0.0;
  double delta_inf = 0.0;
};

inline HeteroSolution hetero_solve(const CbmSpec& spec,
                                   const GaussLegendre& rule) {
  require_valid_dynamics(spec);
  const int m = spec.groups;
  const auto cuts = detail::combined_breakpoints(spec);
  const auto nodes = discretize(spec.mu, rule, cuts);

  // one distinct kernel when shared, otherwise one per group
  const int distinct = spec.shared_kernel() ? 1 : m;
  auto kernel_index = [&](int lambda) { return spec.shared_kernel() ? 0 : lambda; };
  std::vector<std::vector<KernelMoments>> km(
      distinct, std::vector<KernelMoments>(nodes.size()));
  for (int k = 0; k < distinct; ++k)
    for (std::size_t i = 0; i < nodes.size(); ++i)
      km[k][i] = spec.kernels[k].moments_at(nodes[i].x, rule);

  auto pair_avg = [&](int k, int l, auto&& term) {
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      sum += nodes[i].w * term(km[k][i], km[l][i]);
    return sum;
  };

  std::vector<std::vector<double>> dd(distinct, std::vector<double>(distinct));
  std::vector<std::vector<double>> m1d(distinct, std::vector<double>(distinct));
  std::vector<std::vector<double>> m1m1(distinct, std::vector<double>(distinct));
  std::vector<double> own(distinct), q2(distinct);
  for (int k = 0; k < distinct; ++k) {
    for (int l = 0; l < distinct; ++l) {
      dd[k][l] = pair_avg(k, l, [](const KernelMoments& x, const KernelMoments& y) {
        return x.d * y.d;
      });
      m1d[k][l] = pair_avg(k, l, [](const KernelMoments& x, const KernelMoments& y) {
        return x.m1 * y.d;
      });
      m1m1[k][l] = pair_avg(k, l, [](const KernelMoments& x, const KernelMoments& y) {
        return x.m1 * y.m1;
      });
    }
    own[k] = pair_avg(k, k, [](const KernelMoments& x, const KernelMoments&) {
      return x.om1 - x.m1 * x.d;
    });
    q2[k] = pair_avg(k, k, [](const KernelMoments& x, const KernelMoments&) {
      return x.m2;
    });
  }

  int tight_groups = 0;
  for (int lambda = 0; lambda < m; ++lambda)
    if (1.0 - dd[kernel_index(lambda)][kernel_index(lambda)] < kTightTol)
      ++tight_groups;
  if (tight_groups >= 2)
    throw DegeneracyError(
        "hetero_solve: " + std::to_string(tight_groups) +
        " groups have <d^2> = 1; the optimality matrix is not invertible");

  HeteroSolution out{SymMatrix(m), {}, 0.0, {}, {}, 0.0, 0.0};
  for (int i = 0; i < m; ++i) {
    out.a_matrix.at(i, i) = 1.0;
    for (int j = 0; j < m; ++j)
      if (i != j) out.a_matrix.at(i, j) = dd[kernel_index(i)][kernel_index(j)];
  }
  out.a_matrix.check_symmetry(1e-10);

  out.b.resize(m);
  for (int nu = 0; nu < m; ++nu) {
    double v = own[kernel_index(nu)] * spec.alpha[nu];
    for (int lambda = 0; lambda < m; ++lambda)
      v += m1d[kernel_index(lambda)][kernel_index(nu)] * spec.alpha[lambda];
    out.b[nu] = v;
  }

  for (int nu = 0; nu < m; ++nu) {
    out.s += spec.alpha[nu] * spec.alpha[nu] * q2[kernel_index(nu)];
    for (int lambda = 0; lambda < m; ++lambda)
      if (lambda != nu)
        out.s += spec.alpha[nu] * spec.alpha[lambda] *
                 m1m1[kernel_index(nu)][kernel_index(lambda)];
  }

  try {
    out.weights = spd_solve(out.a_matrix, out.b);
  } catch (const SingularOrIndefinite& e) {
    throw DegeneracyError(std::string("hetero_solve: optimality system is "
                                      "singular or indefinite (") +
                          e.what() + "; smallest eigenvalue ~ " +
                          std::to_string(min_eigen_estimate(out.a_matrix)) + ")");
  }
  for (double w : out.weights) out.sum_w += w;
  out.normalised = detail::normalise_or_zero(out.weights, out.sum_w);
  double wb = 0.0;
  const auto aw = out.a_matrix.multiply(out.weights);
  double waw = 0.0;
  for (int i = 0; i < m; ++i) {
    wb += out.weights[i] * out.b[i];
    waw += out.weights[i] * aw[i];
  }
  out.delta_inf = out.s - 2.0 * wb + waw;
  return out;
}

}  // namespace cbm
