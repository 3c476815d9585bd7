#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cbm/errors.hpp"
#include "cbm/kernel.hpp"
#include "cbm/measure.hpp"
#include "cbm/model.hpp"
#include "cbm/nonneg.hpp"

namespace cbm {

using json = nlohmann::json;

namespace detail {

inline const json& require_key(const json& j, const std::string& key,
                               const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    throw ValidationError(path.empty() ? key + ": missing"
                                       : path + "." + key + ": missing");
  return j.at(key);
}

inline double require_number(const json& j, const std::string& key,
                             const std::string& path) {
  const json& v = require_key(j, key, path);
  if (!v.is_number())
    throw ValidationError(path + "." + key + ": expected a number");
  return v.get<double>();
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

}  // namespace detail

/// Tagged measure record:
///   {"type":"uniform","lo":..,"hi":..}
///   {"type":"discrete","atoms":[[loc,mass],..]}
///   {"type":"power","t":..,"half_width":..}
///   {"type":"uniform_mixture","intervals":[[lo,hi,mass],..]}
///   {"type":"mixture","components":[..]}
/// Each record accepts an optional "mass" scaling (default 1).
inline Measure parse_measure(const json& j, const std::string& path) {
  if (!j.is_object())
    throw ValidationError(path + ": expected a measure object");
  const std::string type =
      detail::require_key(j, "type", path).get<std::string>();
  const double mass = j.contains("mass") ? j.at("mass").get<double>() : 1.0;
  try {
    if (type == "uniform")
      return Measure::uniform(detail::require_number(j, "lo", path),
                              detail::require_number(j, "hi", path), mass);
    if (type == "discrete") {
      const json& atoms = detail::require_key(j, "atoms", path);
      if (!atoms.is_array() || atoms.empty())
        throw ValidationError(path + ".atoms: expected a non-empty array");
      std::vector<std::pair<double, double>> parsed;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const json& a = atoms[i];
        if (!a.is_array() || a.size() != 2)
          throw ValidationError(path + ".atoms[" + std::to_string(i) +
                                "]: expected [location, mass]");
        parsed.emplace_back(a[0].get<double>(), a[1].get<double>());
      }
      return Measure::discrete(std::move(parsed));
    }
    if (type == "point")
      return Measure::dirac(detail::require_number(j, "loc", path), mass);
    if (type == "power")
      return Measure::power_tail(detail::require_number(j, "t", path),
                                 detail::require_number(j, "half_width", path),
                                 mass);
    if (type == "uniform_mixture") {
      const json& intervals = detail::require_key(j, "intervals", path);
      std::vector<std::tuple<double, double, double>> parsed;
      for (std::size_t i = 0; i < intervals.size(); ++i) {
        const json& p = intervals[i];
        if (!p.is_array() || p.size() != 3)
          throw ValidationError(path + ".intervals[" + std::to_string(i) +
                                "]: expected [lo, hi, mass]");
        parsed.emplace_back(p[0].get<double>(), p[1].get<double>(),
                            p[2].get<double>());
      }
      return Measure::uniform_mixture(std::move(parsed));
    }
    if (type == "mixture") {
      const json& comps = detail::require_key(j, "components", path);
      std::vector<Measure> parts;
      for (std::size_t i = 0; i < comps.size(); ++i)
        parts.push_back(parse_measure(
            comps[i], path + ".components[" + std::to_string(i) + "]"));
      return Measure::combine(parts);
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  throw ValidationError(path + ".type: unknown measure type '" + type + "'");
}

/// Tagged kernel record: additive | multiplicative | constant | beta |
/// tabulated.
inline BiasKernel parse_kernel(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path + ": expected a kernel object");
  const std::string type =
      detail::require_key(j, "type", path).get<std::string>();
  try {
    if (type == "additive")
      return BiasKernel::additive(
          parse_measure(detail::require_key(j, "rho", path), path + ".rho"));
    if (type == "multiplicative")
      return BiasKernel::multiplicative(
          parse_measure(detail::require_key(j, "rho", path), path + ".rho"));
    if (type == "constant")
      return BiasKernel::constant(
          parse_measure(detail::require_key(j, "rho", path), path + ".rho"));
    if (type == "beta")
      return BiasKernel::beta_polarization(
          detail::require_number(j, "scale", path),
          detail::require_number(j, "floor", path));
    if (type == "tabulated") {
      const json& grid = detail::require_key(j, "z_grid", path);
      const json& measures = detail::require_key(j, "measures", path);
      std::vector<double> z(grid.begin(), grid.end());
      std::vector<Measure> ms;
      for (std::size_t i = 0; i < measures.size(); ++i)
        ms.push_back(parse_measure(
            measures[i], path + ".measures[" + std::to_string(i) + "]"));
      return BiasKernel::tabulated(std::move(z), std::move(ms));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  throw ValidationError(path + ".type: unknown kernel type '" + type + "'");
}

/// Full model config: mu, kernel (or kernels), groups, alpha.
inline CbmSpec parse_spec(const json& root) {
  const Measure mu =
      parse_measure(detail::require_key(root, "mu", ""), "mu");
  std::vector<BiasKernel> kernels;
  if (root.contains("kernel")) {
    kernels.push_back(parse_kernel(root.at("kernel"), "kernel"));
  } else if (root.contains("kernels")) {
    const json& arr = root.at("kernels");
    if (!arr.is_array() || arr.empty())
      throw ValidationError("kernels: expected a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      kernels.push_back(
          parse_kernel(arr[i], "kernels[" + std::to_string(i) + "]"));
  } else {
    throw ValidationError("kernel: missing ('kernel' or 'kernels')");
  }
  const json& groups_j = detail::require_key(root, "groups", "");
  if (!groups_j.is_number_integer())
    throw ValidationError("groups: expected an integer");
  const int groups = groups_j.get<int>();
  const json& alpha_j = detail::require_key(root, "alpha", "");
  if (!alpha_j.is_array())
    throw ValidationError("alpha: expected an array of shares");
  std::vector<double> alpha(alpha_j.begin(), alpha_j.end());
  return CbmSpec::make(mu, std::move(kernels), groups, std::move(alpha));
}

/// mu/rho pair for the non-negativity checks: top-level "rho" wins, else the
/// rho of an additive kernel.
inline std::pair<Measure, Measure> parse_mu_rho(const json& root) {
  const Measure mu = parse_measure(detail::require_key(root, "mu", ""), "mu");
  if (root.contains("rho"))
    return {mu, parse_measure(root.at("rho"), "rho")};
  if (root.contains("kernel")) {
    const json& k = root.at("kernel");
    if (k.contains("type") && k.at("type") == "additive")
      return {mu, parse_measure(detail::require_key(k, "rho", "kernel"),
                                "kernel.rho")};
  }
  throw ValidationError(
      "rho: missing (provide a top-level 'rho' or an additive kernel)");
}

inline std::optional<ContractionFamily> parse_contraction(const json& root) {
  if (!root.contains("contraction")) return std::nullopt;
  const json& c = root.at("contraction");
  return ContractionFamily{detail::require_number(c, "t", "contraction"),
                           detail::require_number(c, "c", "contraction")};
}

/// Resolve a dotted path with optional [index] suffixes, e.g.
/// "kernel.rho.atoms[3].loc" or "alpha[0]"; returns null if absent.
inline json* resolve_path(json& root, const std::string& path) {
  json* cur = &root;
  std::size_t i = 0;
  while (i < path.size()) {
    std::size_t dot = path.find('.', i);
    std::string segment =
        path.substr(i, dot == std::string::npos ? std::string::npos : dot - i);
    i = dot == std::string::npos ? path.size() : dot + 1;
    std::vector<std::size_t> indices;
    std::size_t bracket = segment.find('[');
    std::string key = segment.substr(0, bracket);
    while (bracket != std::string::npos) {
      const std::size_t close = segment.find(']', bracket);
      if (close == std::string::npos) return nullptr;
      indices.push_back(
          std::stoul(segment.substr(bracket + 1, close - bracket - 1)));
      bracket = segment.find('[', close);
    }
    if (!key.empty()) {
      // [location, mass] atom pairs accept the field names as sugar
      if (cur->is_array() && cur->size() == 2 &&
          (key == "loc" || key == "mass")) {
        cur = &cur->at(key == "loc" ? 0 : 1);
      } else if (cur->is_object() && cur->contains(key)) {
        cur = &cur->at(key);
      } else {
        return nullptr;
      }
    }
    for (std::size_t idx : indices) {
      if (!cur->is_array() || idx >= cur->size()) return nullptr;
      cur = &cur->at(idx);
    }
  }
  return cur;
}

/// Set a numeric config entry by path; tries the path verbatim, then under
/// "kernel." so sweep specs may address the shared kernel's rho directly.
inline void set_by_path(json& root, const std::string& path, double value) {
  json* target = resolve_path(root, path);
  if (target == nullptr && root.contains("kernel"))
    target = resolve_path(root, "kernel." + path);
  if (target == nullptr)
    throw ValidationError("param path not found in config: " + path);
  *target = value;
}

}  // namespace cbm
