#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cbm/errors.hpp"
#include "cbm/measure.hpp"
#include "cbm/quadrature.hpp"
#include "cbm/rng.hpp"

namespace cbm {

/// Per-z characteristics of a local bias measure:
///   m1 = E t, m2 = E t^2, om1 = E|t|, d = rho^z(0,1] - rho^z[-1,0).
/// An atom of rho^z exactly at 0 belongs to neither half of d.
struct KernelMoments {
  double m1 = 0.0;
  double m2 = 0.0;
  double om1 = 0.0;
  double d = 0.0;
};

/// Stochastic kernel z -> rho^z mapping the global bias to the conditional
/// law of a group's bias. Immutable; safe for shared concurrent reads.
class BiasKernel {
 public:
  enum class Kind { Constant, Additive, Multiplicative, BetaPolarization, Tabulated };

  /// rho^z = rho for every z (independent groups).
  static BiasKernel constant(Measure rho) {
    BiasKernel k(Kind::Constant);
    k.rho_ = std::move(rho);
    if (!k.rho_.is_probability())
      throw ValidationError("constant kernel: rho must be a probability measure");
    if (!k.rho_.is_symmetric(1e-12))
      throw ValidationError("constant kernel: rho must be symmetric");
    return k;
  }

  /// T = Z + Y with Y ~ rho: rho^z[a,b] = rho[a-z, b-z].
  static BiasKernel additive(Measure rho) {
    BiasKernel k(Kind::Additive);
    k.rho_ = std::move(rho);
    if (!k.rho_.is_probability())
      throw ValidationError("additive kernel: rho must be a probability measure");
    if (!k.rho_.is_symmetric(1e-12))
      throw ValidationError("additive kernel: rho must be symmetric");
    return k;
  }

  /// T = Z * Y with Y ~ rho: rho^0 = point mass at 0 and, for z != 0,
  /// rho^z[a,b] = rho[min(a/z,b/z), max(a/z,b/z)].
  static BiasKernel multiplicative(Measure rho) {
    BiasKernel k(Kind::Multiplicative);
    k.rho_ = std::move(rho);
    if (!k.rho_.is_probability())
      throw ValidationError("multiplicative kernel: rho must be a probability measure");
    return k;
  }

  /// rho^z is the symmetric beta law on [-1, 1] with shape scale*|z| + floor.
  /// Small shapes polarize mass toward ±1; shape 1 is uniform.
  static BiasKernel beta_polarization(double scale, double floor) {
    BiasKernel k(Kind::BetaPolarization);
    if (!(scale >= 0.0) || !std::isfinite(scale))
      throw ValidationError("beta kernel: scale must be >= 0");
    if (!(floor > 0.0) || !std::isfinite(floor))
      throw ValidationError("beta kernel: floor must be > 0");
    k.beta_scale_ = scale;
    k.beta_floor_ = floor;
    return k;
  }

  /// Nearest-node table of measures over a sorted z grid (no interpolation).
  /// The grid must be mirror-complete so the antisymmetry law
  /// rho^z(A) = rho^{-z}(-A) can be validated.
  static BiasKernel tabulated(std::vector<double> z_grid,
                              std::vector<Measure> measures) {
    BiasKernel k(Kind::Tabulated);
    if (z_grid.empty() || z_grid.size() != measures.size())
      throw ValidationError("tabulated kernel: grid and measure counts differ");
    for (std::size_t i = 1; i < z_grid.size(); ++i)
      if (!(z_grid[i] > z_grid[i - 1]))
        throw ValidationError("tabulated kernel: z grid must be strictly increasing");
    for (const auto& m : measures)
      if (!m.is_probability())
        throw ValidationError("tabulated kernel: every node measure must be a probability");
    k.grid_ = std::move(z_grid);
    k.table_ = std::move(measures);
    // Antisymmetry: the node at -z must carry the mirror of the node at z.
    for (std::size_t i = 0; i < k.grid_.size(); ++i) {
      const double target = -k.grid_[i];
      bool found = false;
      for (std::size_t j = 0; j < k.grid_.size(); ++j) {
        if (std::abs(k.grid_[j] - target) <= 1e-12) {
          found = true;
          if (!k.table_[j].approx_equal(k.table_[i].mirrored(), 1e-12))
            throw ValidationError(
                "tabulated kernel: antisymmetry violated between z = " +
                std::to_string(k.grid_[i]) + " and z = " + std::to_string(target));
          break;
        }
      }
      if (!found)
        throw ValidationError("tabulated kernel: grid lacks the mirror node of z = " +
                              std::to_string(k.grid_[i]));
    }
    return k;
  }

  Kind kind() const { return kind_; }
  const Measure& rho() const { return rho_; }
  const std::vector<double>& rho_grid() const { return grid_; }
  const std::vector<Measure>& rho_table() const { return table_; }
  bool measure_backed() const { return kind_ != Kind::BetaPolarization; }

  /// The measure rho^z. Beta kernels have a density with no closed-form
  /// representation in the Measure variants and are rejected here; use
  /// moments_at / inner_nodes / sample_t for them.
  Measure local_measure(double z) const {
    switch (kind_) {
      case Kind::Constant:
        return rho_;
      case Kind::Additive:
        return rho_.shifted(z);
      case Kind::Multiplicative:
        return rho_.scaled(z);
      case Kind::Tabulated:
        return table_[nearest_node(z)];
      case Kind::BetaPolarization:
        throw ValidationError("beta kernel has no closed-form local measure");
    }
    throw ValidationError("unreachable kernel kind");
  }

  KernelMoments moments_at(double z, const GaussLegendre& rule) const {
    KernelMoments km;
    switch (kind_) {
      case Kind::Constant:
      case Kind::Additive:
      case Kind::Tabulated: {
        const Measure m = local_measure(z);
        km.m1 = m.mean();
        km.m2 = m.second_moment();
        km.om1 = m.abs_mean();
        km.d = m.mass(IntervalQuery::open_closed(0.0, 1.0)) -
               m.mass(IntervalQuery::closed_open(-1.0, 0.0));
        return km;
      }
      case Kind::Multiplicative: {
        if (z == 0.0) return km;  // point mass at 0: all four vanish
        km.m1 = z * rho_.mean();
        km.m2 = z * z * rho_.second_moment();
        km.om1 = std::abs(z) * rho_.abs_mean();
        const double dplus = rho_.mass(IntervalQuery::open_closed(0.0, 1.0)) -
                             rho_.mass(IntervalQuery::closed_open(-1.0, 0.0));
        km.d = z > 0.0 ? dplus : -dplus;
        return km;
      }
      case Kind::BetaPolarization: {
        const double shape = beta_shape(z);
        km.m1 = 0.0;
        km.d = 0.0;
        km.om1 = beta_abs_moment(shape, 1, rule);
        km.m2 = beta_abs_moment(shape, 2, rule);
        return km;
      }
    }
    throw ValidationError("unreachable kernel kind");
  }

  /// z-locations where z -> moments_at(z) may jump or kink; the outer
  /// quadrature over the global bias splits its intervals here.
  std::vector<double> moment_breakpoints() const {
    std::vector<double> cuts;
    switch (kind_) {
      case Kind::Constant:
        break;
      case Kind::Additive:
        for (double b : rho_.breakpoints()) cuts.push_back(-b);
        break;
      case Kind::Multiplicative:
      case Kind::BetaPolarization:
        cuts.push_back(0.0);
        break;
      case Kind::Tabulated:
        for (std::size_t i = 1; i < grid_.size(); ++i)
          cuts.push_back(0.5 * (grid_[i - 1] + grid_[i]));
        break;
    }
    return cuts;
  }

  /// Weighted nodes of rho^z for inner integrals \int f(t) rho^z(dt).
  std::vector<QuadNode> inner_nodes(double z, const GaussLegendre& rule,
                                    std::span<const double> cuts = {}) const {
    if (measure_backed()) return discretize(local_measure(z), rule, cuts);
    return beta_nodes(beta_shape(z), rule);
  }

  /// One draw t ~ rho^z.
  double sample_t(double z, Rng& rng) const {
    switch (kind_) {
      case Kind::Constant:
        return rho_.sample(rng);
      case Kind::Additive:
        return z + rho_.sample(rng);
      case Kind::Multiplicative:
        return z * rho_.sample(rng);
      case Kind::Tabulated:
        return table_[nearest_node(z)].sample(rng);
      case Kind::BetaPolarization: {
        const double shape = beta_shape(z);
        const double x = rng.gamma(shape);
        const double y = rng.gamma(shape);
        const double b = (x + y) > 0.0 ? x / (x + y) : 0.5;
        return 2.0 * b - 1.0;
      }
    }
    throw ValidationError("unreachable kernel kind");
  }

  /// Kernel-specific invariants that involve the global bias measure.
  void validate_against(const Measure& mu, const std::string& label) const {
    switch (kind_) {
      case Kind::Additive: {
        const double lo = mu.support_min() + rho_.support_min();
        const double hi = mu.support_max() + rho_.support_max();
        if (lo < -1.0 - 1e-12 || hi > 1.0 + 1e-12)
          throw ValidationError(label +
                                ": additive kernel needs supp mu + supp rho inside [-1, 1]");
        break;
      }
      case Kind::Tabulated: {
        if (mu.support_min() < grid_.front() - 1e-12 ||
            mu.support_max() > grid_.back() + 1e-12)
          throw ValidationError(label + ": global bias support leaves the tabulated z grid");
        break;
      }
      default:
        break;
    }
  }

  double beta_shape(double z) const { return beta_scale_ * std::abs(z) + beta_floor_; }

 private:
  explicit BiasKernel(Kind kind) : kind_(kind) {}

  std::size_t nearest_node(double z) const {
    if (z < grid_.front() - 1e-9 || z > grid_.back() + 1e-9)
      throw ValidationError("tabulated kernel: z = " + std::to_string(z) +
                            " outside grid hull [" + std::to_string(grid_.front()) +
                            ", " + std::to_string(grid_.back()) + "]");
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const double d = std::abs(grid_[i] - z);
      if (d < dist) {
        dist = d;
        best = i;
      }
    }
    return best;
  }

  // E|t|^k over the Beta(shape, shape) law mapped onto [-1, 1].
  double beta_abs_moment(double shape, int k, const GaussLegendre& rule) const {
    double sum = 0.0;
    for (const auto& n : beta_nodes(shape, rule))
      sum += n.w * std::pow(std::abs(n.x), k);
    return sum;
  }

  // Nodes integrating against the density
  //   f(t) = C (1+t)^(shape-1) (1-t)^(shape-1),  C = Gamma(2a)/(Gamma(a)^2 2^(2a-1)).
  // Per side, the graded substitution 1 - |t| = v^p with integer
  // p >= ceil(4/shape) turns the endpoint factor into v^(p*shape - 1)
  // (exponent >= 3), leaving a smooth integrand on [0, 1]:
  //   \int_0^1 g(t) f(t) dt = p C \int_0^1 g(1 - v^p) (2 - v^p)^(shape-1)
  //                               v^(p*shape - 1) dv.
  std::vector<QuadNode> beta_nodes(double shape, const GaussLegendre& rule) const {
    std::vector<QuadNode> out;
    const double logC = std::lgamma(2.0 * shape) - 2.0 * std::lgamma(shape) -
                        (2.0 * shape - 1.0) * std::log(2.0);
    const double C = std::exp(logC);
    const int p = std::max(1, static_cast<int>(std::ceil(4.0 / shape)));
    for (int side = -1; side <= 1; side += 2) {
      for (int i = 0; i < rule.order(); ++i) {
        const double v = 0.5 * (1.0 + rule.nodes()[i]);
        const double vp = std::pow(v, static_cast<double>(p));
        const double t = side * (1.0 - vp);
        const double weight = p * C * std::pow(2.0 - vp, shape - 1.0) *
                              std::pow(v, p * shape - 1.0) * 0.5 *
                              rule.weights()[i];
        out.push_back({t, weight, false});
      }
    }
    return out;
  }

  Kind kind_;
  Measure rho_;
  double beta_scale_ = 0.0;
  double beta_floor_ = 1.0;
  std::vector<double> grid_;
  std::vector<Measure> table_;
};

}  // namespace cbm
