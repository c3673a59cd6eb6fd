#pragma once

// Region-of-attraction estimation: the H(d, r) oracle, bisection on r, the
// largest certified level a, and the sampled check of the extracted component.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "roa/error.hpp"
#include "roa/format.hpp"
#include "roa/grid.hpp"
#include "roa/poly.hpp"
#include "roa/sdp.hpp"
#include "roa/setgeom.hpp"
#include "roa/sos.hpp"

namespace roa {

enum class HOutcome { Feasible, Infeasible, Unknown };

inline const char* to_string(HOutcome o) {
  switch (o) {
    case HOutcome::Feasible: return "Feasible";
    case HOutcome::Infeasible: return "Infeasible";
    case HOutcome::Unknown: return "Unknown";
  }
  return "?";
}

struct HResult {
  HOutcome outcome = HOutcome::Unknown;
  std::optional<SosCertificate> certificate;
  SdpStatus sdp_status = SdpStatus::NumericalFailure;
  std::string message;
  int constraints = 0;
  int iterations = 0;
  double seconds = 0.0;
};

/// Builds, solves and (when feasible) extracts and validates H(d, r). A solver
/// verdict alone never yields Feasible: the certificate must pass the
/// independent residual and Gram checks.
inline HResult h_oracle(const VectorField& f, int d, double r, const CertificateParams& params = {},
                        const SdpOptions& sdp = {}, const CertificateTolerances& tol = {}) {
  if (!(r > 0.0)) throw ContractViolation("h_oracle: radius must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  HResult out;
  const HProgram h = build_h_program(f, d, r, params);
  const CompiledSos compiled = compile(h.program);
  const SdpSolution sol = solve(compiled.problem, sdp);
  out.sdp_status = sol.status;
  out.constraints = static_cast<int>(compiled.problem.constraints.size());
  out.iterations = sol.iterations;
  out.message = sol.message;
  if (sol.certified()) {
    try {
      out.certificate = extract_certificate(h, compiled, sol, tol);
      out.outcome = HOutcome::Feasible;
    } catch (const ResidualTooLarge& e) {
      out.outcome = HOutcome::Unknown;
      out.message = e.what();
    } catch (const GramNotPsd& e) {
      out.outcome = HOutcome::Unknown;
      out.message = e.what();
    }
  } else {
    out.outcome = sol.status == SdpStatus::Infeasible ? HOutcome::Infeasible : HOutcome::Unknown;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Bisection on the radius

template <class Cert>
struct BisectionStep {
  double r = 0.0;
  bool feasible = false;
  std::optional<Cert> certificate;
};

template <class Cert>
struct BisectionTrace {
  std::vector<BisectionStep<Cert>> steps;
  double r_lo = 0.0;
  double r_hi = 0.0;
  double tol = 0.0;

  /// Every feasible radius lies below every infeasible one.
  bool monotone() const {
    double max_feasible = -std::numeric_limits<double>::infinity();
    double min_infeasible = std::numeric_limits<double>::infinity();
    for (const auto& s : steps) {
      if (s.feasible) {
        max_feasible = std::max(max_feasible, s.r);
      } else {
        min_infeasible = std::min(min_infeasible, s.r);
      }
    }
    return max_feasible <= min_infeasible;
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& s : steps) os << "  r = " << format_double(s.r) << (s.feasible ? "  feasible\n" : "  infeasible\n");
    return os.str();
  }
};

template <class Cert>
struct BisectionResult {
  double r_best = 0.0;
  Cert certificate;
  BisectionTrace<Cert> trace;
};

/// Midpoint bisection on [r_min, r_max] until r_hi - r_lo <= tol. The oracle
/// maps r to std::optional<Cert>; an empty answer counts as infeasible. r_min
/// is trusted as a feasible anchor and never queried. The returned
/// certificate is the one from the last feasible call.
template <class Oracle>
auto bisect_radius(Oracle&& oracle, double r_min, double r_max, double tol, int max_iterations = 200) {
  using Answer = std::invoke_result_t<Oracle&, double>;
  using Cert = typename Answer::value_type;
  if (!(r_min >= 0.0 && r_min < r_max)) throw ContractViolation("bisect_radius: need 0 <= r_min < r_max");
  if (!(tol > 0.0)) throw ContractViolation("bisect_radius: tol must be positive");
  BisectionTrace<Cert> trace;
  trace.tol = tol;
  double lo = r_min;
  double hi = r_max;
  std::optional<Cert> best;
  for (int it = 0; it < max_iterations && hi - lo > tol; ++it) {
    const double r = 0.5 * (lo + hi);
    Answer ans = oracle(r);
    const bool feasible = ans.has_value();
    trace.steps.push_back({r, feasible, ans});
    if (feasible) {
      lo = r;
      best = std::move(ans);
    } else {
      hi = r;
    }
  }
  trace.r_lo = lo;
  trace.r_hi = hi;
  if (!best) {
    throw NoFeasibleRadius("bisection found no certified radius in [" + format_double(r_min) + ", " +
                           format_double(r_max) + "]; trace:\n" + trace.summary());
  }
  return BisectionResult<Cert>{lo, std::move(*best), std::move(trace)};
}

// ---------------------------------------------------------------------------
// Largest certified level

struct LevelResult {
  double a = 0.0;
  bool certified = false;
  int solves = 0;
  std::string diagnostic;
};

namespace roa_detail {

/// Smallest value of P over a deterministic sample of the sphere |x| = r.
inline double sphere_min(const Polynomial& P, double r, int samples = 4096) {
  const std::size_t n = P.nvars();
  const CompiledPolynomial cp(P);
  std::vector<double> x(n);
  double best = std::numeric_limits<double>::infinity();
  if (n == 1) {
    for (double s : {-r, r}) {
      x[0] = s;
      best = std::min(best, cp(x));
    }
    return best;
  }
  if (n == 2) {
    for (int k = 0; k < samples; ++k) {
      const double t = 2.0 * std::numbers::pi * k / samples;
      x[0] = r * std::cos(t);
      x[1] = r * std::sin(t);
      best = std::min(best, cp(x));
    }
    return best;
  }
  std::mt19937_64 rng(0);
  std::normal_distribution<double> g;
  for (int k = 0; k < samples * static_cast<int>(n); ++k) {
    double nx = 0.0;
    for (auto& v : x) {
      v = g(rng);
      nx += v * v;
    }
    const double sc = r / std::sqrt(nx);
    for (auto& v : x) v *= sc;
    best = std::min(best, cp(x));
  }
  return best;
}

}  // namespace roa_detail

/// Bisection on a in (0, upper] with build_level_program, where upper is the
/// smaller of the given bound and the sampled minimum of P on the sphere
/// |x| = r (no larger level can keep the sublevel set inside B_r). The loop
/// stops when the bracket is below tol * upper. d_mult < 0 picks deg P - 2
/// (sphere form) or deg P (containment form).
inline LevelResult max_level(const Polynomial& P, double r, double tol, int d_mult, double upper,
                             LevelForm form = LevelForm::Sphere, const SdpOptions& sdp = {}) {
  if (!(r > 0.0)) throw ContractViolation("max_level: radius must be positive");
  if (!(tol > 0.0)) throw ContractViolation("max_level: tol must be positive");
  if (!(upper > 0.0)) throw ContractViolation("max_level: upper bound must be positive");
  if (d_mult < 0) d_mult = form == LevelForm::Sphere ? std::max(0, P.degree() - 2) : P.degree();
  LevelResult out;
  const double bound = std::min(upper, roa_detail::sphere_min(P, r));
  if (!(bound > 0.0)) {
    out.diagnostic = "P is not positive on the sphere |x| = r; returning a = 0";
    return out;
  }
  double lo = 0.0;
  double hi = bound;
  for (int it = 0; it < 60 && hi - lo > tol * bound; ++it) {
    const double a = 0.5 * (lo + hi);
    const LevelProgram lp = build_level_program(P, a, r, d_mult, form);
    const CompiledSos compiled = compile(lp.program);
    const SdpSolution sol = solve(compiled.problem, sdp);
    ++out.solves;
    if (sol.certified()) {
      lo = a;
      out.certified = true;
    } else {
      hi = a;
    }
  }
  out.a = lo;
  if (!out.certified) {
    out.diagnostic = "no positive level certifies L(P, a) inside B_r; returning a = 0";
  }
  return out;
}

namespace roa_detail {

/// H(d, r) plus sigma + lambda u_r = P - a and trace of the quadratic part of P = 1.
inline std::optional<SosCertificate> h_with_level(const VectorField& f, int d, double r, double a,
                                                  const CertificateParams& params, const SdpOptions& sdp,
                                                  const CertificateTolerances& tol) {
  const std::size_t n = f.dimension();
  HProgram h = build_h_program(f, d, r, params);
  const VarRef sigma = h.program.add_sos("sigma", MonomialBasis(n, h.degree / 2));
  const VarRef lambda = h.program.add_free("lambda", monomials_up_to(n, std::max(0, h.degree - 2)));
  h.program.add_identity({"sigma + lambda u_r - P = -a",
                          {PolyTerm{sigma, Polynomial::constant(n, 1.0), std::nullopt},
                           PolyTerm{lambda, Polynomial::ball(n, r), std::nullopt},
                           PolyTerm{h.P, Polynomial::constant(n, -1.0), std::nullopt}},
                          Polynomial::constant(n, -a)});
  CompiledSos compiled = compile(h.program);
  SdpConstraint trace;
  trace.rhs = 1.0;
  const int off = compiled.free_offset[static_cast<std::size_t>(h.P.index)];
  const auto& support = h.program.free_vars()[static_cast<std::size_t>(h.P.index)].support;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (support[k].degree() != 2) continue;
    for (std::size_t i = 0; i < n; ++i) {
      if (support[k][i] == 2) trace.free_coeffs.push_back({off + static_cast<int>(k), 1.0});
    }
  }
  compiled.problem.constraints.push_back(trace);
  const SdpSolution sol = solve(compiled.problem, sdp);
  if (!sol.certified()) return std::nullopt;
  try {
    return extract_certificate(h, compiled, sol, tol);
  } catch (const std::runtime_error&) {
    return std::nullopt;
  }
}

}  // namespace roa_detail

struct LevelOptimal {
  SosCertificate certificate;
  double a = 0.0;
  int solves = 0;
};

/// Among the certificates of H(d, r) whose quadratic part has trace 1, finds
/// one with (nearly) the largest certified sphere level a. Geometric bisection
/// on a over [beta r^2 / 2, gamma r^2] until the bracket ratio is below
/// 1 + rel_tol. Empty when even the lower end does not certify.
inline std::optional<LevelOptimal> level_optimal_certificate(const VectorField& f, int d, double r,
                                                              const CertificateParams& params = {},
                                                              const SdpOptions& sdp = {},
                                                              const CertificateTolerances& tol = {},
                                                              double rel_tol = 1e-2) {
  if (!(r > 0.0)) throw ContractViolation("level_optimal_certificate: radius must be positive");
  double lo = 0.5 * params.beta * r * r;
  double hi = params.gamma * r * r;
  auto cert = roa_detail::h_with_level(f, d, r, lo, params, sdp, tol);
  if (!cert) return std::nullopt;
  LevelOptimal best{std::move(*cert), lo, 1};
  while (hi > lo * (1.0 + rel_tol) && best.solves < 60) {
    const double a = std::sqrt(lo * hi);
    ++best.solves;
    if (auto c = roa_detail::h_with_level(f, d, r, a, params, sdp, tol)) {
      lo = a;
      best.certificate = std::move(*c);
      best.a = a;
    } else {
      hi = a;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Component extraction and sampled verification

/// Which certificate feeds the level and component stages.
///  LastFeasible: the last feasible bisection certificate at r_best.
///  LevelOptimal: over radii r_best (1 - k step), k < candidates, the trace-1
///    certificate with the largest certified level, keeping the radius whose
///    component has the most grid nodes. Falls back to LastFeasible.
enum class CertificateSelection { LastFeasible, LevelOptimal };

inline const char* to_string(CertificateSelection s) {
  return s == CertificateSelection::LastFeasible ? "last-feasible" : "level-optimal";
}

struct RoaEstimate {
  SosCertificate certificate;
  double a = 0.0;
  PointSet component;
  UniformGrid grid;
  double r_best = 0.0;
  /// Radius of the certificate behind D (r_best unless a smaller candidate won).
  double r_level = 0.0;
  CertificateSelection selection = CertificateSelection::LastFeasible;
  double r_star = 0.0;
  double r_tol = 0.0;
  std::optional<double> hausdorff_to_reference;
  /// Half the grid diagonal: the rasterization error carried by every distance.
  double discretization = 0.0;
  int requested_degree = 0;
  int degree = 0;
  bool level_certified = false;
  std::string level_diagnostic;
  std::vector<std::pair<double, bool>> trace;
  double seconds = 0.0;

  double area() const { return static_cast<double>(component.size()) * grid.cell_volume(); }
};

/// Rasterizes {P <= a} ∩ B_r on the grid, keeps the 2n-connected component of
/// the origin node and checks the Lyapunov inequalities at every kept node.
inline RoaEstimate verify_component(const SosCertificate& cert, const VectorField& f, double a,
                                    const UniformGrid& grid, double tol = 1e-6) {
  const std::size_t n = f.dimension();
  if (cert.P.nvars() != n || grid.dim() != n) throw ContractViolation("verify_component: dimension mismatch");
  if (!(a >= 0.0)) throw ContractViolation("verify_component: level must be nonnegative");
  const CompiledPolynomial P(cert.P);
  const CompiledPolynomial lie(lie_derivative(cert.P, f));
  const double r2 = cert.radius * cert.radius;

  std::vector<std::uint8_t> mask(grid.size(), 0);
  std::vector<double> x;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.point(i, x);
    double nx = 0.0;
    for (double v : x) nx += v * v;
    mask[i] = nx <= r2 && P(x) <= a;
  }
  const std::size_t seed = grid.nearest(std::vector<double>(n, 0.0));
  const auto comp = flood_fill(grid, mask, seed);

  RoaEstimate est;
  est.certificate = cert;
  est.a = a;
  est.grid = grid;
  est.discretization = 0.5 * grid.diagonal();
  est.degree = cert.degree;
  est.component = PointSet(n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!comp[i]) continue;
    grid.point(i, x);
    double nx = 0.0;
    for (double v : x) nx += v * v;
    const double p = P(x);
    const double dp = lie(x);
    const char* failed = nullptr;
    if (p < cert.beta * nx - tol) failed = "beta|x|^2 <= P(x)";
    if (p > cert.gamma * nx + tol) failed = "P(x) <= gamma|x|^2";
    if (dp > -cert.delta * nx + tol) failed = "grad(P).f <= -delta|x|^2";
    if (failed) {
      std::string at = "(";
      for (std::size_t k = 0; k < n; ++k) at += (k ? ", " : "") + format_double(x[k]);
      throw SampledConditionViolated(std::string("verify_component: ") + failed + " fails at " + at + ")");
    }
    est.component.add(x);
  }
  return est;
}

/// Grid [-1.05 r, 1.05 r]^n with the given resolution per axis.
inline RoaEstimate verify_component(const SosCertificate& cert, const VectorField& f, double a, int resolution,
                                    double tol = 1e-6) {
  return verify_component(cert, f, a, UniformGrid::centered(f.dimension(), 1.05 * cert.radius, resolution), tol);
}

struct EstimateConfig {
  double r_min = 0.0;
  double r_max = 1.0;
  double r_tol = 1e-3;
  double a_tol = 1e-3;
  CertificateParams params;
  CertificateTolerances tolerances;
  SdpOptions sdp;
  LevelForm level_form = LevelForm::Sphere;
  int level_multiplier_degree = -1;
  CertificateSelection selection = CertificateSelection::LevelOptimal;
  int candidates = 11;
  double candidate_step = 0.01;
  int resolution = 301;
  /// Overrides the default [-1.05 r, 1.05 r]^n raster, e.g. to share the reference lattice.
  std::optional<UniformGrid> grid;
  double verify_tol = 1e-6;
  /// Reference inner set; when nonempty the Hausdorff distance to D is reported.
  const PointSet* reference = nullptr;
  /// Progress callback for each oracle call.
  std::function<void(double r, const HResult&)> on_oracle;
};

/// bisect_radius -> certificate selection -> max_level -> verify_component.
/// Odd d is rounded up.
inline RoaEstimate estimate_roa(const VectorField& f, int d, const EstimateConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const int used = round_up_even(d);
  auto oracle = [&](double r) -> std::optional<SosCertificate> {
    HResult res = h_oracle(f, used, r, cfg.params, cfg.sdp, cfg.tolerances);
    if (cfg.on_oracle) cfg.on_oracle(r, res);
    return std::move(res.certificate);
  };
  auto bis = bisect_radius(oracle, cfg.r_min, cfg.r_max, cfg.r_tol);
  auto grid_for = [&](double r) {
    return cfg.grid ? *cfg.grid : UniformGrid::centered(f.dimension(), 1.05 * r, cfg.resolution);
  };

  SosCertificate cert = bis.certificate;
  CertificateSelection chosen = CertificateSelection::LastFeasible;
  if (cfg.selection == CertificateSelection::LevelOptimal) {
    const UniformGrid grid = grid_for(bis.r_best);
    std::size_t best_size = 0;
    for (int k = 0; k < cfg.candidates; ++k) {
      const double r = bis.r_best * (1.0 - cfg.candidate_step * k);
      if (!(r > 0.0)) break;
      auto lo = level_optimal_certificate(f, used, r, cfg.params, cfg.sdp, cfg.tolerances);
      if (!lo) continue;
      const RoaEstimate trial = verify_component(lo->certificate, f, lo->a, grid, cfg.verify_tol);
      if (trial.component.size() > best_size) {
        best_size = trial.component.size();
        cert = std::move(lo->certificate);
        chosen = CertificateSelection::LevelOptimal;
      }
    }
  }

  const double r = cert.radius;
  const LevelResult lvl = max_level(cert.P, r, cfg.a_tol, cfg.level_multiplier_degree, cert.gamma * r * r,
                                    cfg.level_form, cfg.sdp);
  RoaEstimate est = verify_component(cert, f, lvl.a, grid_for(bis.r_best), cfg.verify_tol);
  est.r_best = bis.r_best;
  est.r_level = r;
  est.selection = chosen;
  est.r_tol = cfg.r_tol;
  est.r_star = bis.r_best + cfg.r_tol;
  est.requested_degree = d;
  est.degree = used;
  est.level_certified = lvl.certified;
  est.level_diagnostic = lvl.diagnostic;
  for (const auto& s : bis.trace.steps) est.trace.emplace_back(s.r, s.feasible);
  if (cfg.reference && !cfg.reference->empty() && !est.component.empty()) {
    est.hausdorff_to_reference = hausdorff(est.component, *cfg.reference);
  }
  est.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return est;
}

}  // namespace roa
