#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cbm/errors.hpp"
#include "cbm/rng.hpp"

namespace cbm {

/// Half-open / closed interval with explicit endpoint closure. Closure flags
/// matter only for atoms; the continuous parts of a measure ignore them.
struct IntervalQuery {
  double lo = 0.0;
  double hi = 0.0;
  bool lower_closed = false;
  bool upper_closed = true;

  static IntervalQuery open_closed(double lo, double hi) {
    return {lo, hi, false, true};
  }
  static IntervalQuery closed_open(double lo, double hi) {
    return {lo, hi, true, false};
  }
  static IntervalQuery closed(double lo, double hi) {
    return {lo, hi, true, true};
  }
  static IntervalQuery open(double lo, double hi) {
    return {lo, hi, false, false};
  }
};

/// Symmetric-support-friendly finite measure on [-1, 1], represented as a
/// finite mixture of three closed-form component kinds:
///   * point masses (exact atom bookkeeping, locations compared exactly),
///   * uniform densities on intervals,
///   * symmetric power-law pieces: one-sided CDF (mass/2)*(r/halfWidth)^t
///     in the radius r = |x - center|.
/// Total mass may be below 1 (sub-probability); sampling then refuses.
/// Everything is immutable after construction.
class Measure {
 public:
  struct Atom {
    double loc;
    double mass;
  };
  struct UniformPiece {
    double lo, hi;
    double mass;
  };
  struct PowerPiece {
    double center;
    double half_width;
    double exponent;
    double mass;
  };

  Measure() = default;

  static Measure dirac(double loc, double mass = 1.0) {
    Measure m;
    m.atoms_.push_back({loc, mass});
    m.finalize("dirac");
    return m;
  }

  static Measure discrete(std::vector<std::pair<double, double>> atoms) {
    Measure m;
    for (auto [loc, mass] : atoms) m.atoms_.push_back({loc, mass});
    m.finalize("discrete");
    return m;
  }

  static Measure uniform(double lo, double hi, double mass = 1.0) {
    Measure m;
    m.uniforms_.push_back({lo, hi, mass});
    m.finalize("uniform");
    return m;
  }

  static Measure uniform_mixture(
      std::vector<std::tuple<double, double, double>> pieces) {
    Measure m;
    for (auto [lo, hi, mass] : pieces) m.uniforms_.push_back({lo, hi, mass});
    m.finalize("uniform_mixture");
    return m;
  }

  /// Symmetric power-tail measure around 0 with CDF (mass/2)*(y/h)^t on
  /// [0, h]. exponent = 1 reduces to uniform on [-h, h].
  static Measure power_tail(double exponent, double half_width,
                            double mass = 1.0) {
    Measure m;
    m.powers_.push_back({0.0, half_width, exponent, mass});
    m.finalize("power");
    return m;
  }

  /// Superposition of several measures (masses add).
  static Measure combine(const std::vector<Measure>& parts) {
    Measure m;
    for (const auto& p : parts) {
      m.atoms_.insert(m.atoms_.end(), p.atoms_.begin(), p.atoms_.end());
      m.uniforms_.insert(m.uniforms_.end(), p.uniforms_.begin(),
                         p.uniforms_.end());
      m.powers_.insert(m.powers_.end(), p.powers_.begin(), p.powers_.end());
    }
    m.finalize("mixture");
    return m;
  }

  double total_mass() const { return total_; }
  bool is_probability(double tol = 1e-12) const {
    return std::abs(total_ - 1.0) <= tol;
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<UniformPiece>& uniform_pieces() const { return uniforms_; }
  const std::vector<PowerPiece>& power_pieces() const { return powers_; }

  bool is_discrete() const { return uniforms_.empty() && powers_.empty(); }
  bool has_atoms() const { return !atoms_.empty(); }

  /// Exact mass of an atom at exactly `loc` (user-specified constants are
  /// compared with ==, never with a tolerance).
  double atom_mass_at(double loc) const {
    double m = 0.0;
    for (const auto& a : atoms_)
      if (a.loc == loc) m += a.mass;
    return m;
  }

  bool is_point_mass_at(double loc, double tol = 1e-12) const {
    return atom_mass_at(loc) >= total_ - tol && total_ > 0.0;
  }

  double support_min() const {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& a : atoms_) lo = std::min(lo, a.loc);
    for (const auto& u : uniforms_) lo = std::min(lo, u.lo);
    for (const auto& p : powers_) lo = std::min(lo, p.center - p.half_width);
    return lo;
  }
  double support_max() const {
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& a : atoms_) hi = std::max(hi, a.loc);
    for (const auto& u : uniforms_) hi = std::max(hi, u.hi);
    for (const auto& p : powers_) hi = std::max(hi, p.center + p.half_width);
    return hi;
  }

  /// mass of the queried interval; 0 outside the support.
  double mass(const IntervalQuery& q) const { return moment(q, 0); }

  /// Shorthand for the canonical (lo, hi] query.
  double mass_oc(double lo, double hi) const {
    return mass(IntervalQuery::open_closed(lo, hi));
  }

  /// k-th raw moment restricted to the queried interval (k = 0, 1, 2).
  double moment(const IntervalQuery& q, int k) const {
    if (q.lo > q.hi)
      throw ValidationError("interval query: lo > hi");
    double out = 0.0;
    for (const auto& a : atoms_)
      if (atom_in(a.loc, q)) out += a.mass * pow_int(a.loc, k);
    for (const auto& u : uniforms_) {
      const double lo = std::max(q.lo, u.lo), hi = std::min(q.hi, u.hi);
      if (hi > lo) {
        const double density = u.mass / (u.hi - u.lo);
        out += density * (pow_int(hi, k + 1) - pow_int(lo, k + 1)) / (k + 1);
      }
    }
    for (const auto& p : powers_) out += power_moment(p, q.lo, q.hi, k);
    return out;
  }

  /// Mass of [-inf, x] (inclusive) or [-inf, x) (exclusive).
  double mass_below(double x, bool inclusive) const {
    double out = 0.0;
    for (const auto& a : atoms_)
      if (a.loc < x || (inclusive && a.loc == x)) out += a.mass;
    for (const auto& u : uniforms_) {
      if (x <= u.lo) continue;
      const double hi = std::min(x, u.hi);
      out += u.mass * (hi - u.lo) / (u.hi - u.lo);
    }
    for (const auto& p : powers_)
      out += power_moment(p, -std::numeric_limits<double>::infinity(), x, 0);
    return out;
  }

  /// Full-support raw moments.
  double mean() const { return full_moment(1); }
  double second_moment() const { return full_moment(2); }
  /// E|X|; the split at 0 keeps atoms at 0 harmless.
  double abs_mean() const {
    const double inf = std::numeric_limits<double>::infinity();
    return moment(IntervalQuery::open_closed(0.0, inf), 1) -
           moment(IntervalQuery::closed_open(-inf, 0.0), 1);
  }

  /// Locations where the CDF can jump or change analytic form.
  std::vector<double> breakpoints() const {
    std::vector<double> pts;
    for (const auto& a : atoms_) pts.push_back(a.loc);
    for (const auto& u : uniforms_) {
      pts.push_back(u.lo);
      pts.push_back(u.hi);
    }
    for (const auto& p : powers_) {
      pts.push_back(p.center - p.half_width);
      pts.push_back(p.center);
      pts.push_back(p.center + p.half_width);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  }

  /// mass(A) == mass(-A) on the breakpoint grid (refined by midpoints),
  /// exact for purely discrete measures.
  bool is_symmetric(double tol = 1e-12) const {
    std::vector<double> radii;
    for (double b : breakpoints()) radii.push_back(std::abs(b));
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
    std::vector<double> grid;
    for (std::size_t i = 0; i < radii.size(); ++i) {
      grid.push_back(radii[i]);
      if (i + 1 < radii.size()) grid.push_back(0.5 * (radii[i] + radii[i + 1]));
    }
    for (double x : grid) {
      if (x <= 0.0) continue;
      const double right = mass(IntervalQuery::open_closed(0.0, x));
      const double left = mass(IntervalQuery::closed_open(-x, 0.0));
      if (std::abs(right - left) > tol) return false;
    }
    return true;
  }

  /// Loose structural comparison: equal atoms (exact locations) and CDFs
  /// agreeing on the merged breakpoint grid.
  bool approx_equal(const Measure& other, double tol = 1e-12) const {
    if (std::abs(total_ - other.total_) > tol) return false;
    auto grid = breakpoints();
    for (double b : other.breakpoints()) grid.push_back(b);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (std::abs(atom_mass_at(grid[i]) - other.atom_mass_at(grid[i])) > tol)
        return false;
      if (std::abs(mass_below(grid[i], true) -
                   other.mass_below(grid[i], true)) > tol)
        return false;
      if (i + 1 < grid.size()) {
        const double mid = 0.5 * (grid[i] + grid[i + 1]);
        if (std::abs(mass_below(mid, true) - other.mass_below(mid, true)) >
            tol)
          return false;
      }
    }
    return true;
  }

  Measure shifted(double dz) const {
    Measure m = *this;
    for (auto& a : m.atoms_) a.loc += dz;
    for (auto& u : m.uniforms_) {
      u.lo += dz;
      u.hi += dz;
    }
    for (auto& p : m.powers_) p.center += dz;
    return m;
  }

  /// Image under x -> z*x. z = 0 collapses everything onto a point mass
  /// at the origin.
  Measure scaled(double z) const {
    if (z == 0.0) return Measure::dirac(0.0, total_);
    Measure m;
    m.total_ = total_;
    for (const auto& a : atoms_) m.atoms_.push_back({a.loc * z, a.mass});
    for (const auto& u : uniforms_) {
      const double a = u.lo * z, b = u.hi * z;
      m.uniforms_.push_back({std::min(a, b), std::max(a, b), u.mass});
    }
    for (const auto& p : powers_)
      m.powers_.push_back(
          {p.center * z, p.half_width * std::abs(z), p.exponent, p.mass});
    return m;
  }

  Measure mirrored() const { return scaled(-1.0); }

  /// Inverse-CDF draw using a single uniform variate; components are
  /// consumed in storage order, then inverted in closed form.
  double sample(Rng& rng) const {
    if (!is_probability())
      throw ValidationError(
          "sample: refusing to sample a sub-probability measure (total mass " +
          std::to_string(total_) + ")");
    const double u = rng.uniform01();
    double cum = 0.0;
    for (const auto& a : atoms_) {
      cum += a.mass;
      if (u < cum) return a.loc;
    }
    for (const auto& up : uniforms_) {
      if (u < cum + up.mass) {
        const double local = (u - cum) / up.mass;
        return up.lo + local * (up.hi - up.lo);
      }
      cum += up.mass;
    }
    for (const auto& p : powers_) {
      if (u < cum + p.mass) {
        const double local = (u - cum) / p.mass;  // in [0, 1)
        if (local < 0.5)
          return p.center -
                 p.half_width * std::pow(1.0 - 2.0 * local, 1.0 / p.exponent);
        return p.center +
               p.half_width * std::pow(2.0 * local - 1.0, 1.0 / p.exponent);
      }
      cum += p.mass;
    }
    // u fell into the rounding sliver past the accumulated total.
    if (!atoms_.empty()) return atoms_.back().loc;
    if (!uniforms_.empty()) return uniforms_.back().hi;
    return powers_.back().center + powers_.back().half_width;
  }

 private:
  static bool atom_in(double loc, const IntervalQuery& q) {
    const bool above = loc > q.lo || (loc == q.lo && q.lower_closed);
    const bool below = loc < q.hi || (loc == q.hi && q.upper_closed);
    return above && below;
  }

  static double pow_int(double x, int k) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
  }

  double full_moment(int k) const {
    const double inf = std::numeric_limits<double>::infinity();
    return moment(IntervalQuery::closed(-inf, inf), k);
  }

  // k-th moment of a power piece restricted to [lo, hi] (closure
  // irrelevant: the piece is atomless). Decomposed per side in the radius
  // r = |x - center| with dG = (mass/2) * t/h^t * r^(t-1) dr.
  static double power_moment(const PowerPiece& p, double lo, double hi,
                             int k) {
    const double h = p.half_width, t = p.exponent;
    auto radial = [&](double r0, double r1, int kk) {
      r0 = std::clamp(r0, 0.0, h);
      r1 = std::clamp(r1, 0.0, h);
      if (r1 <= r0) return 0.0;
      const double scale = 0.5 * p.mass * t / std::pow(h, t);
      return scale * (std::pow(r1, t + kk) - std::pow(r0, t + kk)) / (t + kk);
    };
    double out = 0.0;
    {  // right side: x = center + r
      const double a = std::max(lo, p.center), b = std::min(hi, p.center + h);
      if (b > a) {
        const double g0 = radial(a - p.center, b - p.center, 0);
        const double g1 = radial(a - p.center, b - p.center, 1);
        const double g2 = radial(a - p.center, b - p.center, 2);
        if (k == 0) out += g0;
        if (k == 1) out += p.center * g0 + g1;
        if (k == 2) out += p.center * p.center * g0 + 2.0 * p.center * g1 + g2;
      }
    }
    {  // left side: x = center - r
      const double a = std::max(lo, p.center - h), b = std::min(hi, p.center);
      if (b > a) {
        const double g0 = radial(p.center - b, p.center - a, 0);
        const double g1 = radial(p.center - b, p.center - a, 1);
        const double g2 = radial(p.center - b, p.center - a, 2);
        if (k == 0) out += g0;
        if (k == 1) out += p.center * g0 - g1;
        if (k == 2) out += p.center * p.center * g0 - 2.0 * p.center * g1 + g2;
      }
    }
    return out;
  }

  void finalize(const std::string& what) {
    total_ = 0.0;
    for (const auto& a : atoms_) {
      if (!(a.mass > 0.0) || !std::isfinite(a.mass))
        throw ValidationError(what + ": atom mass must be > 0");
      if (!std::isfinite(a.loc) || a.loc < -1.0 || a.loc > 1.0)
        throw ValidationError(what + ": atom location outside [-1, 1]");
      total_ += a.mass;
    }
    for (const auto& u : uniforms_) {
      if (!(u.mass > 0.0) || !std::isfinite(u.mass))
        throw ValidationError(what + ": interval mass must be > 0");
      if (!(u.lo < u.hi))
        throw ValidationError(what + ": interval needs lo < hi");
      if (u.lo < -1.0 - 1e-12 || u.hi > 1.0 + 1e-12)
        throw ValidationError(what + ": interval outside [-1, 1]");
      total_ += u.mass;
    }
    for (const auto& p : powers_) {
      if (!(p.mass > 0.0)) throw ValidationError(what + ": mass must be > 0");
      if (!(p.exponent > 0.0))
        throw ValidationError(what + ": power exponent must be > 0");
      if (!(p.half_width > 0.0) || p.half_width > 0.5 + 1e-12)
        throw ValidationError(what + ": half_width must lie in (0, 1/2]");
      if (p.center - p.half_width < -1.0 - 1e-12 ||
          p.center + p.half_width > 1.0 + 1e-12)
        throw ValidationError(what + ": power support outside [-1, 1]");
      total_ += p.mass;
    }
    if (total_ <= 0.0) throw ValidationError(what + ": measure has no mass");
    if (total_ > 1.0 + 1e-9)
      throw ValidationError(what + ": total mass exceeds 1");
  }

  std::vector<Atom> atoms_;
  std::vector<UniformPiece> uniforms_;
  std::vector<PowerPiece> powers_;
  double total_ = 0.0;
};

}  // namespace cbm
