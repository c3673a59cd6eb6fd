#pragma once

// JSON forms of system descriptions, experiment configs, certificates and
// estimates. All parse failures surface as ParseError.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roa/error.hpp"
#include "roa/odesim.hpp"
#include "roa/poly.hpp"
#include "roa/poly_io.hpp"
#include "roa/roa.hpp"

namespace roa {

using json = nlohmann::json;

struct SystemSpec {
  std::string name;
  std::size_t nvars = 0;
  std::vector<std::string> components;
  /// y = c x maps the system into the unit ball; 1 means no rescaling.
  double rescale = 1.0;
  std::string notes;

  VectorField field() const {
    std::vector<Polynomial> polys;
    for (std::size_t i = 0; i < components.size(); ++i) {
      try {
        polys.push_back(parse_polynomial(components[i], nvars));
      } catch (const ParseError& e) {
        throw ParseError("system '" + name + "' component " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    const VectorField f(std::move(polys));
    return rescale == 1.0 ? f : f.rescaled(rescale);
  }
};

namespace io_detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

/// A number or a "p/q" string.
inline double parse_ratio(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return std::stod(s);
      return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    } catch (const std::exception&) {
      throw ParseError("cannot read '" + s + "' as a number");
    }
  }
  throw ParseError("expected a number or a \"p/q\" string");
}

inline json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

}  // namespace io_detail

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

inline SystemSpec parse_system(const json& j) {
  if (!j.is_object()) throw ParseError("system: expected a JSON object");
  SystemSpec s;
  s.name = io_detail::get_or<std::string>(j, "name", "system");
  if (!j.contains("field")) throw ParseError("system: missing 'field' (list of component strings)");
  s.components = io_detail::get_or<std::vector<std::string>>(j, "field", {});
  s.nvars = io_detail::get_or<std::size_t>(j, "nvars", s.components.size());
  if (s.components.empty()) throw ParseError("system: 'field' is empty");
  if (s.nvars != s.components.size()) {
    throw ParseError("system: nvars = " + std::to_string(s.nvars) + " but 'field' has " +
                     std::to_string(s.components.size()) + " components");
  }
  if (j.contains("rescale")) s.rescale = io_detail::parse_ratio(j.at("rescale"));
  if (!(s.rescale > 0.0) || !std::isfinite(s.rescale)) throw ParseError("system: rescale must be positive");
  s.notes = io_detail::get_or<std::string>(j, "notes", "");
  try {
    (void)s.field();
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("system: ") + e.what());
  }
  return s;
}

inline SystemSpec load_system(const std::string& path) {
  return parse_system(io_detail::parse_text(read_file(path), path));
}

struct ExperimentConfig {
  std::vector<int> degrees{4, 6, 8};
  double r_min = 0.0;
  double r_max = 1.0;
  double r_tol = 1e-3;
  double a_tol = 1e-3;
  CertificateParams params;
  std::vector<double> box_lo{-1.0, -1.0};
  std::vector<double> box_hi{1.0, 1.0};
  int resolution = 301;
  IntegratorOptions integrator;
  bool reference = true;
  CertificateSelection selection = CertificateSelection::LevelOptimal;
  std::uint64_t seed = 0;

  UniformGrid grid() const { return UniformGrid(box_lo, box_hi, resolution); }
};

inline ExperimentConfig parse_config(const json& j, std::size_t nvars) {
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  using io_detail::get_or;
  ExperimentConfig c;
  c.box_lo.assign(nvars, -1.0);
  c.box_hi.assign(nvars, 1.0);
  c.degrees = get_or(j, "degrees", c.degrees);
  c.r_min = get_or(j, "r_min", c.r_min);
  c.r_max = get_or(j, "r_max", c.r_max);
  c.r_tol = get_or(j, "r_tol", c.r_tol);
  c.a_tol = get_or(j, "a_tol", c.a_tol);
  c.params.beta = get_or(j, "beta", c.params.beta);
  c.params.gamma = get_or(j, "gamma", c.params.gamma);
  c.params.delta = get_or(j, "delta", c.params.delta);
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.contains("half_width")) {
      const double h = get_or(g, "half_width", 1.0);
      c.box_lo.assign(nvars, -h);
      c.box_hi.assign(nvars, h);
    }
    c.box_lo = get_or(g, "lo", c.box_lo);
    c.box_hi = get_or(g, "hi", c.box_hi);
    c.resolution = get_or(g, "resolution", c.resolution);
  }
  if (j.contains("integrator")) {
    const json& g = j.at("integrator");
    c.integrator.converge_eps = get_or(g, "converge_eps", c.integrator.converge_eps);
    c.integrator.escape_radius = get_or(g, "escape_radius", c.integrator.escape_radius);
    c.integrator.t_max = get_or(g, "t_max", c.integrator.t_max);
    c.integrator.atol = get_or(g, "atol", c.integrator.atol);
    c.integrator.rtol = get_or(g, "rtol", c.integrator.rtol);
  }
  c.reference = get_or(j, "reference", c.reference);
  const std::string sel = get_or<std::string>(j, "selection", to_string(c.selection));
  if (sel == "level-optimal") {
    c.selection = CertificateSelection::LevelOptimal;
  } else if (sel == "last-feasible") {
    c.selection = CertificateSelection::LastFeasible;
  } else {
    throw ParseError("config: selection must be 'level-optimal' or 'last-feasible'");
  }
  c.seed = get_or(j, "seed", c.seed);

  if (!(c.r_min >= 0.0 && c.r_min < c.r_max)) throw ParseError("config: need 0 <= r_min < r_max");
  for (double t : {c.r_tol, c.a_tol, c.params.beta, c.params.gamma, c.params.delta}) {
    if (!(t > 0.0)) throw ParseError("config: tolerances and beta, gamma, delta must be positive");
  }
  if (c.params.beta > c.params.gamma) throw ParseError("config: beta must not exceed gamma");
  for (int d : c.degrees) {
    if (d < 2) throw ParseError("config: degrees must be >= 2");
  }
  if (c.box_lo.size() != nvars || c.box_hi.size() != nvars) throw ParseError("config: grid box has wrong dimension");
  if (c.resolution < 1) throw ParseError("config: grid resolution must be >= 1");
  for (std::size_t k = 0; k < nvars; ++k) {
    if (!(c.box_lo[k] < c.box_hi[k])) throw ParseError("config: grid box needs lo < hi");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path, std::size_t nvars) {
  return parse_config(io_detail::parse_text(read_file(path), path), nvars);
}

inline json to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [m, c] : p.terms()) {
    std::vector<int> e(m.nvars());
    for (std::size_t i = 0; i < m.nvars(); ++i) e[i] = m[i];
    terms.push_back({{"exponents", e}, {"coeff", c}});
  }
  return {{"text", to_string(p)}, {"terms", terms}};
}

inline Polynomial polynomial_from_json(const json& j, std::size_t nvars) {
  if (j.contains("terms")) {
    Polynomial p(nvars);
    for (const auto& t : j.at("terms")) {
      const auto e = t.at("exponents").get<std::vector<int>>();
      if (e.size() != nvars) throw ParseError("polynomial term has the wrong number of exponents");
      p.add_term(Monomial(e), t.at("coeff").get<double>());
    }
    return p;
  }
  return parse_polynomial(j.at("text").get<std::string>(), nvars);
}

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.cols(); ++k) row[static_cast<std::size_t>(k)] = m(i, k);
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const SosCertificate& c) {
  json j;
  j["P"] = to_json(c.P);
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["delta"] = c.delta;
  j["radius"] = c.radius;
  j["degree"] = c.degree;
  j["identity_residuals"] = c.identity_residuals;
  j["min_gram_eigenvalue"] = c.min_gram_eigenvalue;
  json mult = json::array();
  for (int k = 0; k < 6; ++k) {
    json basis = json::array();
    for (const auto& m : c.basis[static_cast<std::size_t>(k)].monomials) basis.push_back(to_string(m).empty() ? "1" : to_string(m));
    mult.push_back({{"name", "s" + std::to_string(k + 1)},
                    {"polynomial", to_json(c.s[static_cast<std::size_t>(k)])},
                    {"basis", basis},
                    {"gram", to_json(c.gram[static_cast<std::size_t>(k)])}});
  }
  j["multipliers"] = mult;
  return j;
}

/// Deterministic summary of an estimate; wall-clock time is left out so
/// reruns are byte-identical.
inline json to_json(const RoaEstimate& e) {
  json j;
  j["requested_degree"] = e.requested_degree;
  j["degree"] = e.degree;
  j["r_best"] = e.r_best;
  j["r_star_estimate"] = e.r_star;
  j["r_tol"] = e.r_tol;
  j["r_level"] = e.r_level;
  j["selection"] = to_string(e.selection);
  j["a"] = e.a;
  j["level_certified"] = e.level_certified;
  if (!e.level_diagnostic.empty()) j["level_diagnostic"] = e.level_diagnostic;
  j["component_size"] = e.component.size();
  j["area"] = e.area();
  j["discretization"] = e.discretization;
  j["hausdorff_to_reference"] = e.hausdorff_to_reference ? json(*e.hausdorff_to_reference) : json(nullptr);
  j["grid"] = {{"lo", e.grid.lo()}, {"hi", e.grid.hi()}, {"resolution", e.grid.resolution()}};
  json trace = json::array();
  for (const auto& [r, ok] : e.trace) trace.push_back({{"r", r}, {"feasible", ok}});
  j["bisection"] = trace;
  j["certificate"] = to_json(e.certificate);
  return j;
}

}  // namespace roa
