#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cbm/errors.hpp"
#include "cbm/kernel.hpp"
#include "cbm/measure.hpp"

namespace cbm {

/// A collective bias model: global bias measure mu, one local-bias kernel
/// shared by all groups (or one per group), the group count and the
/// asymptotic population shares.
struct CbmSpec {
  Measure mu;
  std::vector<BiasKernel> kernels;  // size 1 (shared) or size groups
  int groups = 0;
  std::vector<double> alpha;

  bool shared_kernel() const { return kernels.size() == 1; }
  const BiasKernel& kernel(int lambda) const {
    return shared_kernel() ? kernels.front() : kernels[lambda];
  }

  static CbmSpec make(Measure mu, std::vector<BiasKernel> kernels, int groups,
                      std::vector<double> alpha) {
    if (groups < 1) throw ValidationError("groups: must be >= 1");
    if (kernels.empty() ||
        (kernels.size() != 1 && kernels.size() != static_cast<std::size_t>(groups)))
      throw ValidationError("kernels: provide one shared kernel or one per group");
    if (alpha.size() != static_cast<std::size_t>(groups))
      throw ValidationError("alpha: length must equal groups");
    double sum = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      if (!(alpha[i] > 0.0))
        throw ValidationError("alpha[" + std::to_string(i) + "]: must be > 0");
      sum += alpha[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ValidationError("alpha: entries must sum to 1 (got " +
                            std::to_string(sum) + ")");
    if (!mu.is_probability())
      throw ValidationError("mu: must be a probability measure");
    if (!mu.is_symmetric(1e-12))
      throw ValidationError("mu: must be symmetric");
    if (mu.support_min() < -1.0 - 1e-12 || mu.support_max() > 1.0 + 1e-12)
      throw ValidationError("mu: support outside [-1, 1]");
    for (std::size_t i = 0; i < kernels.size(); ++i)
      kernels[i].validate_against(mu, "kernel[" + std::to_string(i) + "]");
    return CbmSpec{std::move(mu), std::move(kernels), groups, std::move(alpha)};
  }
};

namespace detail {

// mu-mass of {z : rho^z is a point mass at `target`}, computed structurally
// per kernel family (exact; no node sampling).
inline double point_mass_set_mass(const Measure& mu, const BiasKernel& k,
                                  double target) {
  switch (k.kind()) {
    case BiasKernel::Kind::Constant:
      return k.rho().is_point_mass_at(target) ? mu.total_mass() : 0.0;
    case BiasKernel::Kind::Additive: {
      // shifted rho is a point mass at target iff rho itself is a point mass
      // at some c and z = target - c
      for (const auto& a : k.rho().atoms())
        if (k.rho().is_point_mass_at(a.loc)) return mu.atom_mass_at(target - a.loc);
      return 0.0;
    }
    case BiasKernel::Kind::Multiplicative: {
      double mass = 0.0;
      if (target == 0.0) {
        if (k.rho().is_point_mass_at(0.0)) return mu.total_mass();
        mass += mu.atom_mass_at(0.0);
        return mass;
      }
      for (const auto& a : k.rho().atoms())
        if (a.loc != 0.0 && k.rho().is_point_mass_at(a.loc)) {
          const double z = target / a.loc;
          if (std::abs(z) <= 1.0) mass += mu.atom_mass_at(z);
        }
      return mass;
    }
    case BiasKernel::Kind::BetaPolarization:
      return 0.0;
    case BiasKernel::Kind::Tabulated: {
      // nearest-node lookup makes rho^z constant on each grid cell
      double mass = 0.0;
      const auto& grid = k.rho_grid();
      const auto& table = k.rho_table();
      for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!table[i].is_point_mass_at(target)) continue;
        const double lo =
            i == 0 ? -2.0 : 0.5 * (grid[i - 1] + grid[i]);
        const double hi =
            i + 1 == grid.size() ? 2.0 : 0.5 * (grid[i] + grid[i + 1]);
        mass += mu.mass(IntervalQuery::closed_open(lo, hi));
      }
      return mass;
    }
  }
  return 0.0;
}

}  // namespace detail

/// mu{z : rho^z = delta_0} for one kernel.
inline double trivial_set_mass(const Measure& mu, const BiasKernel& k) {
  return detail::point_mass_set_mass(mu, k, 0.0);
}

/// mu{z : rho^z = delta_{-1} or rho^z = delta_{+1}} for one kernel.
inline double unanimous_set_mass(const Measure& mu, const BiasKernel& k) {
  return detail::point_mass_set_mass(mu, k, 1.0) +
         detail::point_mass_set_mass(mu, k, -1.0);
}

/// Every council sign pattern occurs with positive probability iff the
/// kernel is not an almost-sure point mass at ±1 under mu.
inline bool is_sufficiently_random(const CbmSpec& spec) {
  for (const auto& k : spec.kernels)
    if (unanimous_set_mass(spec.mu, k) >= 1.0 - 1e-12) return false;
  return true;
}

/// Shared entry gate: rejects trivial local bias (all voters independent)
/// and models that are not sufficiently random.
inline void require_valid_dynamics(const CbmSpec& spec) {
  for (const auto& k : spec.kernels)
    if (trivial_set_mass(spec.mu, k) >= 1.0 - 1e-12)
      throw DegeneracyError(
          "trivial local bias: rho^z is the point mass at 0 for mu-almost all z "
          "(all voters independent)");
  if (!is_sufficiently_random(spec))
    throw DegeneracyError(
        "model is not sufficiently random: rho^z is a point mass at +1 or -1 "
        "for mu-almost all z (popular vote always unanimous)");
}

}  // namespace cbm
