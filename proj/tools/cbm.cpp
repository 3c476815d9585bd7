// Command-line front door: parse a model config, dispatch the asymptotic,
// finite-population, unanimity, non-negativity and sweep computations, and
// emit machine-readable JSON/CSV.
//
// Exit codes: 0 success, 1 config error, 2 model degeneracy (trivial local
// bias, insufficient randomness, singular optimality system), 3 numerical
// failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbm/cbm.hpp"
#include "cbm/config.hpp"

namespace {

using cbm::json;

int default_quad_order() {
  if (const char* env = std::getenv("CBM_QUAD_ORDER")) {
    const int v = std::atoi(env);
    if (v >= 2) return v;
  }
  return 64;
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cbm::ValidationError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw cbm::ValidationError("config: invalid JSON in '" + path + "': " +
                               e.what());
  }
  return j;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out)
    throw cbm::ValidationError("out: cannot open '" + out_path + "' for writing");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json matrix_to_json(const cbm::SymMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.dim(); ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// weights

struct WeightsRow {
  bool tight = false;
  bool hetero = false;
  double a = 0.0;
  double c1 = 0.0, c2 = 0.0;
  double sum_w = 0.0, delta_inf = 0.0;
  double d1 = 0.0, d2 = 0.0;
  std::vector<double> weights, normalised;
  json a_matrix, b_vector;  // hetero only
};

WeightsRow compute_weights(const cbm::CbmSpec& spec,
                           const cbm::GaussLegendre& rule) {
  WeightsRow row;
  if (!spec.shared_kernel()) {
    const auto h = cbm::hetero_solve(spec, rule);
    row.hetero = true;
    row.weights = h.weights;
    row.normalised = h.normalised;
    row.sum_w = h.sum_w;
    row.delta_inf = h.delta_inf;
    row.a_matrix = matrix_to_json(h.a_matrix);
    row.b_vector = json(h.b);
    return row;
  }
  const auto s = cbm::summarize(spec, rule);
  row.a = s.a;
  if (cbm::is_tightly_correlated(spec, rule) || s.a >= 1.0 - cbm::kTightTol) {
    const auto t = cbm::tight_weights(s, spec.groups);
    row.tight = true;
    row.weights = t.weights;
    row.normalised.assign(spec.groups, 1.0 / spec.groups);
    row.sum_w = t.sum_w;
    row.delta_inf = t.delta_inf;
    return row;
  }
  const auto w = cbm::asymptotic_weights(s, spec.alpha);
  row.c1 = w.c1;
  row.c2 = w.c2;
  row.weights = w.weights;
  row.normalised = w.normalised;
  row.sum_w = w.sum_w;
  row.delta_inf = w.delta_inf;
  row.d1 = w.d1;
  row.d2 = w.d2;
  return row;
}

json weights_to_json(const WeightsRow& row) {
  json out;
  out["tight"] = row.tight;
  out["a"] = row.hetero ? json(nullptr) : json(row.a);
  out["C1"] = (row.tight || row.hetero) ? json(nullptr) : json(row.c1);
  out["C2"] = (row.tight || row.hetero) ? json(nullptr) : json(row.c2);
  out["D1"] = (row.tight || row.hetero) ? json(nullptr) : json(row.d1);
  out["D2"] = (row.tight || row.hetero) ? json(nullptr) : json(row.d2);
  out["weights"] = row.weights;
  out["normalised"] = row.normalised;
  out["sum_w"] = row.sum_w;
  out["delta_inf"] = row.delta_inf;
  if (row.hetero) {
    out["A"] = row.a_matrix;
    out["b"] = row.b_vector;
  }
  if (row.tight)
    out["note"] =
        "tightly correlated: any weights with this sum are asymptotically "
        "optimal";
  return out;
}

std::string weights_to_csv(const WeightsRow& row,
                           const std::vector<double>& alpha) {
  std::ostringstream os;
  os << "group,alpha,weight,normalised,C1,C2,a,sum_w,delta_inf,tight\n";
  for (std::size_t i = 0; i < row.weights.size(); ++i) {
    os << i << ',' << csv_number(alpha[i]) << ','
       << csv_number(row.weights[i]) << ',' << csv_number(row.normalised[i])
       << ',';
    if (row.tight || row.hetero)
      os << ",,";
    else
      os << csv_number(row.c1) << ',' << csv_number(row.c2) << ',';
    if (row.hetero)
      os << ',';
    else
      os << csv_number(row.a) << ',';
    os << csv_number(row.sum_w) << ',' << csv_number(row.delta_inf) << ','
       << (row.tight ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// finite / unanimity

json finite_to_json(const cbm::FiniteMoments& m, const cbm::FiniteWeights& w) {
  json out;
  out["method"] =
      m.method == cbm::FiniteMoments::Method::Exact ? "exact" : "mc";
  out["sizes"] = m.sizes;
  out["A"] = matrix_to_json(m.a_matrix);
  out["b"] = m.b;
  out["s"] = m.s;
  out["weights"] = w.weights;
  out["normalised"] = w.normalised;
  out["delta_N"] = w.delta_n;
  if (m.method == cbm::FiniteMoments::Method::MonteCarlo) {
    out["samples"] = m.samples;
    out["seed"] = m.seed;
    out["stderr_A"] = matrix_to_json(m.stderr_a);
    out["stderr_b"] = m.stderr_b;
    out["stderr_s"] = m.stderr_s;
  }
  return out;
}

std::string finite_to_csv(const cbm::FiniteMoments& m,
                          const cbm::FiniteWeights& w) {
  std::ostringstream os;
  os << "entry,i,j,value,stderr\n";
  const bool mc = m.method == cbm::FiniteMoments::Method::MonteCarlo;
  for (int i = 0; i < m.a_matrix.dim(); ++i)
    for (int j = 0; j < m.a_matrix.dim(); ++j)
      os << "A," << i << ',' << j << ',' << csv_number(m.a_matrix.at(i, j))
         << ',' << (mc ? csv_number(m.stderr_a.at(i, j)) : "") << '\n';
  for (std::size_t i = 0; i < m.b.size(); ++i)
    os << "b," << i << ",," << csv_number(m.b[i]) << ','
       << (mc ? csv_number(m.stderr_b[i]) : "") << '\n';
  os << "s,,," << csv_number(m.s) << ',' << (mc ? csv_number(m.stderr_s) : "")
     << '\n';
  for (std::size_t i = 0; i < w.weights.size(); ++i)
    os << "w," << i << ",," << csv_number(w.weights[i]) << ",\n";
  for (std::size_t i = 0; i < w.normalised.size(); ++i)
    os << "normalised," << i << ",," << csv_number(w.normalised[i]) << ",\n";
  os << "delta_N,,," << csv_number(w.delta_n) << ",\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// nonneg

json ram_to_json(const cbm::RamReport& r) {
  json out;
  out["a"] = r.a;
  out["r"] = r.r;
  out["s"] = r.s;
  out["m"] = r.m;
  out["r_minus_am"] = r.r_minus_am;
  out["negative_for_small_groups"] = r.negative_for_small_groups;
  return out;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  std::string param, mirror, emit_what;
  double from = 0.0, to = 0.0;
  int steps = 0;
};

std::string run_sweep(const json& base_config, const SweepOptions& opt,
                      const cbm::GaussLegendre& rule) {
  std::ostringstream os;
  int groups = 0;
  {
    json probe = base_config;
    cbm::set_by_path(probe, opt.param, opt.from);
    if (!opt.mirror.empty()) cbm::set_by_path(probe, opt.mirror, -opt.from);
    groups = cbm::parse_spec(probe).groups;
  }
  if (opt.emit_what == "weights") {
    os << "param,value,a,tight,C1,C2,sum_w,delta_inf";
    for (int i = 0; i < groups; ++i) os << ",w_" << (i + 1);
    os << '\n';
  } else if (opt.emit_what == "a") {
    os << "param,value,a,tight\n";
  } else {
    os << "param,value,delta_inf,tight\n";
  }
  for (int k = 0; k < opt.steps; ++k) {
    const double v =
        opt.steps == 1
            ? opt.from
            : opt.from + (opt.to - opt.from) * k / (opt.steps - 1.0);
    json cfg = base_config;
    cbm::set_by_path(cfg, opt.param, v);
    if (!opt.mirror.empty()) cbm::set_by_path(cfg, opt.mirror, -v);
    const auto spec = cbm::parse_spec(cfg);
    const WeightsRow row = compute_weights(spec, rule);
    os << opt.param << ',' << csv_number(v) << ',';
    if (opt.emit_what == "weights") {
      os << (row.hetero ? "" : csv_number(row.a)) << ','
         << (row.tight ? 1 : 0) << ',';
      if (row.tight || row.hetero)
        os << ",,";
      else
        os << csv_number(row.c1) << ',' << csv_number(row.c2) << ',';
      os << csv_number(row.sum_w) << ',' << csv_number(row.delta_inf);
      for (double w : row.weights) os << ',' << csv_number(w);
    } else if (opt.emit_what == "a") {
      os << (row.hetero ? "" : csv_number(row.a)) << ','
         << (row.tight ? 1 : 0);
    } else {
      os << csv_number(row.delta_inf) << ',' << (row.tight ? 1 : 0);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optimal council voting weights under collective bias models"};
  app.require_subcommand(1);
  app.fallthrough();  // let --quad-order appear after the subcommand too

  int quad_order = default_quad_order();
  app.add_option("--quad-order", quad_order,
                 "Gauss-Legendre order for continuous bias measures")
      ->capture_default_str();

  std::string config_path, out_path, format = "json";

  auto* weights = app.add_subcommand("weights", "asymptotic optimal weights");
  weights->add_option("--config", config_path, "model config file")->required();
  weights->add_option("--format", format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
  weights->add_option("--out", out_path, "output path (default stdout)");

  auto* finite = app.add_subcommand("finite", "finite-population moments and weights");
  std::vector<std::int64_t> sizes;
  std::string method = "exact";
  std::uint64_t samples = 100000, seed = 0;
  finite->add_option("--config", config_path)->required();
  finite->add_option("--sizes", sizes, "group sizes, e.g. 5,7,9")
      ->required()
      ->delimiter(',');
  finite->add_option("--method", method, "exact|mc")
      ->check(CLI::IsMember({"exact", "mc"}));
  finite->add_option("--samples", samples, "Monte Carlo sample count");
  finite->add_option("--seed", seed, "Monte Carlo seed");
  finite->add_option("--format", format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
  finite->add_option("--out", out_path);

  auto* unanimity = app.add_subcommand("unanimity", "P(all groups vote alike)");
  unanimity->add_option("--config", config_path)->required();
  unanimity->add_option("--sizes", sizes)->required()->delimiter(',');
  unanimity->add_option("--samples", samples);
  unanimity->add_option("--seed", seed);
  unanimity->add_option("--out", out_path);

  auto* nonneg = app.add_subcommand("nonneg", "sign analysis of the constant weight term");
  std::string check;
  double ribbon_c = 0.0, ribbon_cc = 0.0, a_value = -1.0;
  double contraction_t = 0.0, contraction_c = 0.0;
  nonneg->add_option("--config", config_path)->required();
  nonneg->add_option("--check", check, "ram|fosd|ribbon|tfunc|contraction")
      ->required()
      ->check(CLI::IsMember({"ram", "fosd", "ribbon", "tfunc", "contraction"}));
  nonneg->add_option("--c", ribbon_c, "ribbon lower constant");
  nonneg->add_option("--C", ribbon_cc, "ribbon upper constant");
  nonneg->add_option("--a-value", a_value, "a for the reciprocal ribbon condition");
  nonneg->add_option("--t", contraction_t, "contraction family exponent");
  nonneg->add_option("--cfactor", contraction_c, "contraction factor");
  nonneg->add_option("--out", out_path);

  auto* sweep = app.add_subcommand("sweep", "parameter sweep to CSV");
  SweepOptions sw;
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--param", sw.param, "dotted path into the config")->required();
  sweep->add_option("--mirror", sw.mirror,
                    "path set to the negated value each step (keeps discrete "
                    "measures symmetric)");
  sweep->add_option("--from", sw.from)->required();
  sweep->add_option("--to", sw.to)->required();
  sweep->add_option("--steps", sw.steps)->required()->check(CLI::PositiveNumber);
  sweep->add_option("--emit", sw.emit_what, "weights|a|deficit")
      ->required()
      ->check(CLI::IsMember({"weights", "a", "deficit"}));
  sweep->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    const cbm::GaussLegendre rule(quad_order);
    if (weights->parsed()) {
      const auto spec = cbm::parse_spec(load_config(config_path));
      const WeightsRow row = compute_weights(spec, rule);
      emit(out_path, format == "json" ? weights_to_json(row).dump(2)
                                      : weights_to_csv(row, spec.alpha));
    } else if (finite->parsed()) {
      const auto spec = cbm::parse_spec(load_config(config_path));
      const cbm::FiniteMoments moments =
          method == "exact"
              ? cbm::exact_moments(spec, sizes, rule)
              : cbm::mc_moments(spec, sizes, samples, seed);
      const auto w = cbm::finite_weights(moments);
      emit(out_path, format == "json" ? finite_to_json(moments, w).dump(2)
                                      : finite_to_csv(moments, w));
    } else if (unanimity->parsed()) {
      const auto spec = cbm::parse_spec(load_config(config_path));
      const auto est = cbm::unanimity_probability(spec, sizes, samples, seed);
      json out;
      out["probability"] = est.probability;
      out["stderr"] = est.stderr_value;
      out["samples"] = est.samples;
      out["seed"] = est.seed;
      out["sizes"] = sizes;
      emit(out_path, out.dump(2));
    } else if (nonneg->parsed()) {
      const json cfg = load_config(config_path);
      json out;
      if (check == "ram") {
        const auto [mu, rho] = cbm::parse_mu_rho(cfg);
        out = ram_to_json(cbm::ram_quantities(mu, rho, rule));
      } else if (check == "fosd") {
        const auto [mu, rho] = cbm::parse_mu_rho(cfg);
        const auto rep = cbm::check_fosd_sufficient(mu, rho, rule);
        out["applies"] = rep.applies;
        out["guarantees_nonneg"] = rep.guarantees_nonneg;
        out["branch"] = rep.branch == cbm::FosdReport::Branch::ZDominates
                            ? "Z-dominates"
                            : rep.branch == cbm::FosdReport::Branch::YDominates
                                  ? "Y-dominates"
                                  : "none";
        out["ram"] = ram_to_json(rep.ram);
      } else if (check == "ribbon") {
        if (ribbon_c <= 0.0 || ribbon_cc <= 0.0)
          throw cbm::ValidationError("ribbon: provide --c and --C");
        if (a_value < 0.0) {
          try {
            const auto [mu, rho] = cbm::parse_mu_rho(cfg);
            a_value = cbm::ram_quantities(mu, rho, rule).a;
          } catch (const cbm::ValidationError&) {
            a_value = 0.0;
          }
        }
        const auto rep = cbm::check_ribbon(ribbon_c, ribbon_cc, a_value);
        out["cond1"] = rep.cond1;
        out["cond2"] = rep.cond2;
        out["cond_recip"] =
            rep.cond_recip.has_value() ? json(*rep.cond_recip) : json(nullptr);
        out["a"] = a_value;
        out["any_sufficient"] =
            rep.cond1 || rep.cond2 || (rep.cond_recip && *rep.cond_recip);
      } else if (check == "tfunc") {
        const auto mu = cbm::parse_measure(cfg.at("mu"), "mu");
        const double t = cbm::t_functional(mu, rule);
        out["T"] = t;
        out["threshold"] = 0.25;
        out["nonneg_for_uniform_rho"] = t <= 0.25 + 1e-12;
      } else {  // contraction
        cbm::ContractionFamily fam{contraction_t, contraction_c};
        if (auto parsed = cbm::parse_contraction(cfg);
            parsed && contraction_t == 0.0)
          fam = *parsed;
        const auto rep = cbm::contraction_sign(fam);
        out["t"] = fam.t;
        out["c"] = fam.c;
        out["h"] = rep.h;
        out["sign"] = rep.sign == cbm::SignClass::Negative ? "negative"
                      : rep.sign == cbm::SignClass::Zero   ? "zero"
                                                           : "nonneg";
        out["t_at_least_one_override"] = rep.t_at_least_one_override;
        if (fam.t < 1.0) out["c0"] = cbm::critical_c0(fam.t, 1e-13);
      }
      emit(out_path, out.dump(2));
    } else if (sweep->parsed()) {
      emit(out_path, run_sweep(load_config(config_path), sw, rule));
    }
  } catch (const cbm::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const cbm::DegeneracyError& e) {
    std::cerr << "model degeneracy: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
