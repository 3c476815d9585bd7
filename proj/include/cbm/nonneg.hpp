#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cbm/errors.hpp"
#include "cbm/measure.hpp"
#include "cbm/quadrature.hpp"

namespace cbm {

/// Sign analysis of the constant weight term for additive models
/// T = Z + Y: r = <m1 d> (inter-group cohesion), m = <om1> (intra-group
/// cohesion), s = m - r, a = <d^2>. The constant term is non-negative iff
/// r - a m >= 0.
struct RamReport {
  double a = 0.0;
  double r = 0.0;
  double s = 0.0;
  double m = 0.0;
  double r_minus_am = 0.0;
  bool negative_for_small_groups = false;
};

namespace detail {

inline void require_nonneg_measure(const Measure& m, const std::string& name) {
  if (m.support_min() < -0.5 - 1e-12 || m.support_max() > 0.5 + 1e-12)
    throw ValidationError(name + ": support must lie inside [-1/2, 1/2]");
  if (!m.is_symmetric(1e-9))
    throw ValidationError(name + ": measure must be symmetric");
}

inline std::vector<double> radius_cuts(const Measure& m) {
  std::vector<double> cuts;
  for (double b : m.breakpoints()) {
    cuts.push_back(std::abs(b));
    cuts.push_back(-std::abs(b));
  }
  return cuts;
}

}  // namespace detail

/// a = 2 int (rho(-z,z])^2 mu(dz), r = 2 int z rho(-z,z] mu(dz) and
/// s = 2 int y mu(-y,y] rho(dy), each over (0, 1/2]. The integrands extend
/// evenly and vanish at 0, so symmetric measures let the one-sided integrals
/// collapse into plain averages. Integrands are CDFs of the other measure:
/// piecewise smooth between its atoms/kinks, where the quadrature splits.
inline RamReport ram_quantities(const Measure& mu, const Measure& rho,
                                const GaussLegendre& rule) {
  detail::require_nonneg_measure(mu, "mu");
  detail::require_nonneg_measure(rho, "rho");
  const auto mu_cuts = detail::radius_cuts(mu);
  const auto rho_cuts = detail::radius_cuts(rho);
  RamReport out;
  out.a = average(
      mu,
      [&](double z) {
        const double q = rho.mass_oc(-std::abs(z), std::abs(z));
        return q * q;
      },
      rule, rho_cuts);
  out.r = average(
      mu,
      [&](double z) {
        return std::abs(z) * rho.mass_oc(-std::abs(z), std::abs(z));
      },
      rule, rho_cuts);
  out.s = average(
      rho,
      [&](double y) {
        return std::abs(y) * mu.mass_oc(-std::abs(y), std::abs(y));
      },
      rule, mu_cuts);
  out.m = out.r + out.s;
  out.r_minus_am = out.r - out.a * out.m;
  out.negative_for_small_groups = out.r_minus_am < 0.0;
  return out;
}

/// |X1| first order stochastically dominates |X2|: the folded CDF of X1 sits
/// below that of X2 everywhere. Checked on the merged breakpoint radii plus
/// a 1e-3 grid; folded CDFs are piecewise monotone between breakpoints, so
/// the grid is a safety net for mixtures, not the main argument.
inline bool fosd_abs(const Measure& x1, const Measure& x2) {
  double radius = 0.0;
  std::vector<double> grid;
  for (const Measure* m : {&x1, &x2}) {
    for (double b : m->breakpoints()) {
      grid.push_back(std::abs(b));
      radius = std::max(radius, std::abs(b));
    }
  }
  for (double x = 0.0; x <= radius + 1e-3; x += 1e-3) grid.push_back(x);
  auto folded = [](const Measure& m, double x) {
    return m.mass(IntervalQuery::closed(-x, x));
  };
  for (double x : grid)
    if (folded(x1, x) > folded(x2, x) + 1e-12) return false;
  return true;
}

/// Sufficient conditions for a non-negative constant term based on first
/// order stochastic dominance between |Z| and |Y|. `applies == false` is
/// inconclusive, not a proof of negativity.
struct FosdReport {
  enum class Branch { ZDominates, YDominates, None };
  bool applies = false;
  bool guarantees_nonneg = false;
  Branch branch = Branch::None;
  RamReport ram;
};

inline FosdReport check_fosd_sufficient(const Measure& mu, const Measure& rho,
                                        const GaussLegendre& rule) {
  FosdReport out;
  out.ram = ram_quantities(mu, rho, rule);
  const bool z_dom = fosd_abs(mu, rho);
  const bool y_dom = fosd_abs(rho, mu);
  if (z_dom && out.ram.a <= 0.5 + 1e-12) {
    out.applies = out.guarantees_nonneg = true;
    out.branch = FosdReport::Branch::ZDominates;
  } else if (y_dom && out.ram.s <= 2.0 * out.ram.r + 1e-12) {
    out.applies = out.guarantees_nonneg = true;
    out.branch = FosdReport::Branch::YDominates;
  }
  return out;
}

/// Conditions on ribbon constants c rho A <= mu A <= C rho A that force a
/// non-negative constant term. cond_recip applies only when c = 1/C and then
/// needs the model's a value.
struct RibbonReport {
  bool cond1 = false;
  bool cond2 = false;
  std::optional<bool> cond_recip;
};

inline RibbonReport check_ribbon(double c_low, double c_high, double a_value) {
  if (!(c_low > 0.0) || !(c_high >= c_low))
    throw ValidationError("ribbon: need 0 < c <= C");
  RibbonReport out;
  out.cond1 =
      c_high < 3.0 && c_low >= c_high * c_high / (3.0 - c_high) - 1e-12;
  out.cond2 = c_high <= c_low * (3.0 * c_low * c_low - 1.0) + 1e-12;
  if (std::abs(c_low * c_high - 1.0) <= 1e-9)
    out.cond_recip = a_value <= 1.0 / (1.0 + c_high * c_high) + 1e-12;
  return out;
}

/// T(mu) = int_0^(1/2) y mu(-y,y] dy + E Z^2. For rho uniform on
/// [-1/2, 1/2], the constant term is non-negative iff T(mu) <= 1/4.
inline double t_functional(const Measure& mu, const GaussLegendre& rule) {
  if (!mu.is_probability())
    throw ValidationError("t_functional: mu must be a probability measure");
  detail::require_nonneg_measure(mu, "mu");
  const auto cuts = detail::radius_cuts(mu);
  const double integral = integrate_segments(
      [&](double y) { return y * mu.mass_oc(-y, y); }, 0.0, 0.5, rule, cuts);
  return integral + mu.second_moment();
}

/// Largest achievable a over symmetric discrete measures with at most n
/// support points (mu = rho case); increasing in n with limit 1/3.
inline double discrete_a_bound(int n) {
  if (n < 1) throw ValidationError("discrete_a_bound: n must be >= 1");
  const double nn = static_cast<double>(n);
  if (n % 2 == 0) return (nn - 2.0) * (nn + 2.0) / (3.0 * nn * nn);
  return (nn - 1.0) * (nn + 1.0) / (3.0 * nn * nn);
}

/// Power-law local bias F_rho(y) = 2^(t-1) y^t with the global bias a
/// c-contraction of it: mu(cA) = rho(A).
struct ContractionFamily {
  double t = 0.0;
  double c = 0.0;
};

enum class SignClass { Negative, Zero, NonNegative };

struct ContractionReport {
  double h = 0.0;
  SignClass sign = SignClass::NonNegative;
  bool t_at_least_one_override = false;
};

inline double contraction_h(double t, double c) {
  return std::pow(c, 1.0 + t) - 3.0 * (1.0 + t) * std::pow(c, 1.0 - t) + 1.0 +
         2.0 * t;
}

/// Sign of r - am for the contraction family: r - am >= 0 iff h(c) <= 0.
/// For t >= 1 the constant term is strictly positive for every c in (0, 1)
/// regardless of h's shape; the report flags that override.
inline ContractionReport contraction_sign(const ContractionFamily& fam) {
  if (!(fam.t > 0.0)) throw ValidationError("contraction: t must be > 0");
  if (!(fam.c > 0.0 && fam.c < 1.0))
    throw ValidationError("contraction: c must lie in (0, 1)");
  ContractionReport out;
  out.h = contraction_h(fam.t, fam.c);
  if (fam.t >= 1.0) {
    out.t_at_least_one_override = true;
    out.sign = SignClass::NonNegative;
    return out;
  }
  if (out.h > 1e-12)
    out.sign = SignClass::Negative;
  else if (out.h < -1e-12)
    out.sign = SignClass::NonNegative;
  else
    out.sign = SignClass::Zero;
  return out;
}

/// Unique root c0 of h on (0, min(x0, 1)) for t in (0, 1), found by
/// bisection; the bracket is guaranteed because h decreases strictly up to
/// its critical point x0 = (3(1-t))^(1/(2t)) and h(0) > 0 > h(min(x0, 1)).
inline double critical_c0(double t, double tol = 1e-12) {
  if (!(t > 0.0 && t < 1.0))
    throw ValidationError("critical_c0: t must lie in (0, 1)");
  const double x0 = std::pow(3.0 * (1.0 - t), 1.0 / (2.0 * t));
  const double hi = std::min(x0, 1.0);
  double lo = 0.0;
  if (!(contraction_h(t, 0.0) > 0.0) || !(contraction_h(t, hi) < 0.0))
    throw NumericalError("critical_c0: bracket invalid");
  double hi_b = hi;
  double mid = 0.5 * (lo + hi_b);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi_b);
    const double hm = contraction_h(t, mid);
    if (std::abs(hm) <= tol) break;
    if (hm > 0.0)
      lo = mid;
    else
      hi_b = mid;
  }
  // h is strictly decreasing on [0, x0), so the sign pattern around the root
  // is monotone; verify on a coarse grid.
  double prev = contraction_h(t, 0.0);
  for (int k = 1; k <= 32; ++k) {
    const double c = hi * k / 33.0;
    const double hc = contraction_h(t, c);
    if (hc >= prev)
      throw NumericalError("critical_c0: h is not strictly decreasing");
    prev = hc;
  }
  return mid;
}

}  // namespace cbm
