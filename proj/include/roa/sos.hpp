#pragma once

// Sum-of-squares programs compiled to SdpProblem through the Gram-matrix
// parameterization, plus the Lyapunov certificate program H(d, r) and the
// sublevel-containment program used to size the certified level set.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "roa/error.hpp"
#include "roa/poly.hpp"
#include "roa/poly_io.hpp"
#include "roa/sdp.hpp"

namespace roa {

/// Graded-lex ordered monomials of degree in [min_degree, max_degree].
struct MonomialBasis {
  std::size_t nvars = 0;
  std::vector<Monomial> monomials;

  MonomialBasis() = default;
  MonomialBasis(std::size_t n, int max_degree, int min_degree = 0)
      : nvars(n), monomials(monomials_up_to(n, max_degree, min_degree)) {}

  std::size_t size() const { return monomials.size(); }
  bool empty() const { return monomials.empty(); }
  const Monomial& operator[](std::size_t i) const { return monomials[i]; }
  int max_degree() const { return monomials.empty() ? 0 : monomials.back().degree(); }
};

/// z^T G z for the basis vector z.
inline Polynomial gram_to_poly(const Eigen::MatrixXd& G, const MonomialBasis& basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  if (G.rows() != n || G.cols() != n) throw ContractViolation("gram_to_poly: Gram size does not match basis");
  Polynomial p(std::max<std::size_t>(basis.nvars, 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& zi = basis[static_cast<std::size_t>(i)];
    p.add_term(zi * zi, G(i, i));
    for (Eigen::Index j = i + 1; j < n; ++j) {
      p.add_term(zi * basis[static_cast<std::size_t>(j)], G(i, j) + G(j, i));
    }
  }
  return p;
}

enum class VarKind { Free, Sos };

struct VarRef {
  VarKind kind = VarKind::Free;
  int index = 0;
};

/// multiplier * T(v), where T is the identity or the Lie derivative along a field.
struct PolyTerm {
  VarRef var;
  Polynomial multiplier;
  std::optional<VectorField> lie_field;

  Polynomial apply(const Polynomial& p) const {
    if (lie_field) return lie_derivative(p, *lie_field) * multiplier;
    return p * multiplier;
  }
  Polynomial image(const Monomial& m) const { return apply(Polynomial::monomial(m)); }
};

/// sum(terms) == rhs, coefficient by coefficient.
struct PolyIdentity {
  std::string name;
  std::vector<PolyTerm> terms;
  Polynomial rhs;
};

class SosProgram {
 public:
  struct FreeVar {
    std::string name;
    std::vector<Monomial> support;
  };
  struct SosVar {
    std::string name;
    MonomialBasis basis;
  };

  explicit SosProgram(std::size_t nvars) : nvars_(nvars) {}

  std::size_t nvars() const { return nvars_; }

  VarRef add_free(std::string name, std::vector<Monomial> support) {
    free_.push_back({std::move(name), std::move(support)});
    return {VarKind::Free, static_cast<int>(free_.size()) - 1};
  }
  /// An empty half-basis denotes a multiplier fixed to zero.
  VarRef add_sos(std::string name, MonomialBasis half_basis) {
    sos_.push_back({std::move(name), std::move(half_basis)});
    return {VarKind::Sos, static_cast<int>(sos_.size()) - 1};
  }
  void add_identity(PolyIdentity id) { identities_.push_back(std::move(id)); }

  const std::vector<FreeVar>& free_vars() const { return free_; }
  const std::vector<SosVar>& sos_vars() const { return sos_; }
  const std::vector<PolyIdentity>& identities() const { return identities_; }

  /// Top degree reachable by the SOS terms of an identity.
  int sos_degree(const PolyIdentity& id) const {
    int d = -1;
    for (const auto& t : id.terms) {
      if (t.var.kind != VarKind::Sos) continue;
      const auto& basis = sos_[static_cast<std::size_t>(t.var.index)].basis;
      if (basis.empty()) continue;
      const Monomial top = basis.monomials.back() * basis.monomials.back();
      d = std::max(d, t.image(top).degree());
    }
    return d;
  }
  /// Top degree of the fixed side and the free-variable terms.
  int fixed_degree(const PolyIdentity& id) const {
    int d = id.rhs.is_zero() ? -1 : id.rhs.degree();
    for (const auto& t : id.terms) {
      if (t.var.kind != VarKind::Free) continue;
      for (const auto& m : free_[static_cast<std::size_t>(t.var.index)].support) {
        const Polynomial img = t.image(m);
        if (!img.is_zero()) d = std::max(d, img.degree());
      }
    }
    return d;
  }

  /// Every identity's fixed side must fit under the degree its SOS terms can reach.
  void check_balanced() const {
    for (const auto& id : identities_) {
      const int fixed = fixed_degree(id);
      const int sos = sos_degree(id);
      if (fixed > sos) {
        std::ostringstream os;
        os << "identity '" << id.name << "' has degree " << fixed << " but its SOS terms only reach degree "
           << sos << "; the SOS multipliers need degree >= " << (fixed + fixed % 2);
        throw DegreeImbalance(os.str());
      }
    }
  }

 private:
  std::size_t nvars_;
  std::vector<FreeVar> free_;
  std::vector<SosVar> sos_;
  std::vector<PolyIdentity> identities_;
};

struct CompiledSos {
  SdpProblem problem;
  std::vector<int> free_offset;  // first x_f index of each free variable
  std::vector<int> sos_block;    // PSD block of each SOS variable, -1 if fixed to zero
  std::vector<std::pair<int, Monomial>> row_origin;  // (identity, monomial) per constraint
};

inline CompiledSos compile(const SosProgram& prog) {
  prog.check_balanced();
  CompiledSos out;
  int nfree = 0;
  for (const auto& v : prog.free_vars()) {
    out.free_offset.push_back(nfree);
    nfree += static_cast<int>(v.support.size());
  }
  for (const auto& v : prog.sos_vars()) {
    if (v.basis.empty()) {
      out.sos_block.push_back(-1);
    } else {
      out.sos_block.push_back(static_cast<int>(out.problem.block_dims.size()));
      out.problem.block_dims.push_back(static_cast<int>(v.basis.size()));
    }
  }
  out.problem.num_free = nfree;

  struct Row {
    std::map<std::tuple<int, int, int>, double> entries;
    std::map<int, double> free;
    double rhs = 0.0;
  };
  for (std::size_t idx = 0; idx < prog.identities().size(); ++idx) {
    const auto& id = prog.identities()[idx];
    std::map<Monomial, Row, GrlexLess> rows;
    for (const auto& t : id.terms) {
      if (t.var.kind == VarKind::Free) {
        const auto& v = prog.free_vars()[static_cast<std::size_t>(t.var.index)];
        const int off = out.free_offset[static_cast<std::size_t>(t.var.index)];
        for (std::size_t k = 0; k < v.support.size(); ++k) {
          const Polynomial img = t.image(v.support[k]);
          for (const auto& [mono, c] : img.terms()) rows[mono].free[off + static_cast<int>(k)] += c;
        }
      } else {
        const auto& v = prog.sos_vars()[static_cast<std::size_t>(t.var.index)];
        const int block = out.sos_block[static_cast<std::size_t>(t.var.index)];
        if (block < 0) continue;
        for (std::size_t p = 0; p < v.basis.size(); ++p) {
          for (std::size_t q = p; q < v.basis.size(); ++q) {
            const Polynomial img = t.image(v.basis[p] * v.basis[q]);
            for (const auto& [mono, c] : img.terms()) {
              rows[mono].entries[{block, static_cast<int>(p), static_cast<int>(q)}] += c;
            }
          }
        }
      }
    }
    for (const auto& [mono, c] : id.rhs.terms()) rows[mono].rhs = c;

    for (const auto& [mono, row] : rows) {
      SdpConstraint con;
      for (const auto& [key, v] : row.entries) {
        if (v != 0.0) con.entries.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
      }
      for (const auto& [j, v] : row.free) {
        if (v != 0.0) con.free_coeffs.emplace_back(j, v);
      }
      con.rhs = row.rhs;
      if (con.entries.empty() && con.free_coeffs.empty() && con.rhs == 0.0) continue;
      out.problem.constraints.push_back(std::move(con));
      out.row_origin.emplace_back(static_cast<int>(idx), mono);
    }
  }
  return out;
}

/// Polynomial values of every program variable read back from an SDP solution.
struct SosValues {
  std::vector<Polynomial> free;
  std::vector<Polynomial> sos;
  std::vector<Eigen::MatrixXd> grams;
};

inline SosValues read_solution(const SosProgram& prog, const CompiledSos& compiled, const SdpSolution& sol) {
  SosValues vals;
  const std::size_t n = prog.nvars();
  for (std::size_t i = 0; i < prog.free_vars().size(); ++i) {
    Polynomial p(n);
    const auto& support = prog.free_vars()[i].support;
    for (std::size_t k = 0; k < support.size(); ++k) {
      p.add_term(support[k], sol.free(compiled.free_offset[i] + static_cast<Eigen::Index>(k)));
    }
    vals.free.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < prog.sos_vars().size(); ++i) {
    const int block = compiled.sos_block[i];
    Eigen::MatrixXd G = block < 0 ? Eigen::MatrixXd(0, 0) : sol.X[static_cast<std::size_t>(block)];
    MonomialBasis basis = prog.sos_vars()[i].basis;
    basis.nvars = n;
    vals.sos.push_back(gram_to_poly(G, basis));
    vals.grams.push_back(std::move(G));
  }
  return vals;
}

/// Coefficient residual of one identity, recomputed by polynomial arithmetic.
inline double identity_residual(const SosProgram& prog, const SosValues& vals, std::size_t identity) {
  const auto& id = prog.identities().at(identity);
  Polynomial lhs(prog.nvars());
  for (const auto& t : id.terms) {
    const auto& v = t.var.kind == VarKind::Free ? vals.free[static_cast<std::size_t>(t.var.index)]
                                                : vals.sos[static_cast<std::size_t>(t.var.index)];
    lhs += t.apply(v);
  }
  return coeff_max_abs_diff(lhs, id.rhs);
}

// ---------------------------------------------------------------------------
// Lyapunov certificate program H(d, r)

struct CertificateParams {
  double beta = 1e-3;
  double gamma = 1e3;
  double delta = 1e-3;
};

struct CertificateTolerances {
  double identity_residual = 1e-6;
  double gram_psd = 1e-8;
};

struct SosCertificate {
  Polynomial P;
  std::array<Polynomial, 6> s;
  std::array<Eigen::MatrixXd, 6> gram;
  std::array<MonomialBasis, 6> basis;
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double radius = 0.0;
  int degree = 0;
  std::array<double, 3> identity_residuals{};
  double min_gram_eigenvalue = 0.0;
};

struct HProgram {
  SosProgram program{1};
  VectorField field;
  int requested_degree = 0;
  int degree = 0;  // even degree actually used for P
  double radius = 0.0;
  CertificateParams params;
  VarRef P;
  std::array<VarRef, 6> s{};
  std::array<int, 6> multiplier_degrees{};
};

/// Smallest even number >= v.
inline int round_up_even(int v) { return v + (v % 2 != 0 ? 1 : 0); }

/// Builds the three identities
///   P - beta|x|^2        = s1 + s2 u_r
///  -P + gamma|x|^2       = s3 + s4 u_r
///  -grad(P).f - delta|x|^2 = s5 + s6 u_r
/// with P free (no constant or linear terms) and s1..s6 SOS.
///
/// All right-hand sides vanish to second order at the origin, so the Gram
/// half-bases start at degree 1. `multiplier_degrees`, when given, overrides
/// the inferred degrees of s1..s6.
inline HProgram build_h_program(const VectorField& f, int d, double r, const CertificateParams& params = {},
                                std::optional<std::array<int, 6>> multiplier_degrees = std::nullopt) {
  if (!(r > 0.0)) throw ContractViolation("build_h_program: radius must be positive");
  if (!(params.beta > 0.0 && params.gamma > 0.0 && params.delta > 0.0)) {
    throw ContractViolation("build_h_program: beta, gamma, delta must be positive");
  }
  if (params.beta > params.gamma) throw ContractViolation("build_h_program: beta must not exceed gamma");
  if (!f.equilibrium_at_origin()) throw ContractViolation("build_h_program: field must vanish at the origin");
  if (d < 2) throw DegreeImbalance("build_h_program: P needs degree >= 2 to satisfy beta|x|^2 <= P");

  const std::size_t n = f.dimension();
  HProgram h;
  h.program = SosProgram(n);
  h.field = f;
  h.requested_degree = d;
  h.degree = round_up_even(d);
  h.radius = r;
  h.params = params;

  const int deg_lie = h.degree + std::max(f.degree(), 1) - 1;
  const std::array<int, 3> needed{h.degree, h.degree, round_up_even(deg_lie)};
  std::array<int, 6> degs{};
  for (int k = 0; k < 3; ++k) {
    degs[2 * k] = needed[k];
    degs[2 * k + 1] = round_up_even(std::max(needed[k] - 2, 0));
  }
  if (multiplier_degrees) {
    for (int k = 0; k < 3; ++k) {
      const int got = std::max((*multiplier_degrees)[2 * k], (*multiplier_degrees)[2 * k + 1] + 2);
      const int need = k < 2 ? h.degree : deg_lie;
      if (got < need) {
        std::ostringstream os;
        os << "identity " << (k + 1) << " has degree " << need << "; s" << (2 * k + 1) << " needs degree >= "
           << round_up_even(need) << " or s" << (2 * k + 2) << " needs degree >= " << round_up_even(need) - 2
           << " (got " << (*multiplier_degrees)[2 * k] << ", " << (*multiplier_degrees)[2 * k + 1] << ")";
        throw DegreeImbalance(os.str());
      }
    }
    degs = *multiplier_degrees;
  }
  h.multiplier_degrees = degs;

  h.P = h.program.add_free("P", monomials_up_to(n, h.degree, 2));
  for (int k = 0; k < 6; ++k) {
    h.s[k] = h.program.add_sos("s" + std::to_string(k + 1), MonomialBasis(n, degs[k] / 2, 1));
  }

  const Polynomial one = Polynomial::constant(n, 1.0);
  const Polynomial u = Polynomial::ball(n, r);
  const Polynomial norm2 = Polynomial::squared_norm(n);
  auto term = [&](VarRef v, const Polynomial& mult) { return PolyTerm{v, mult, std::nullopt}; };

  h.program.add_identity({"P - beta|x|^2 = s1 + s2 u_r",
                          {term(h.P, one), term(h.s[0], -one), term(h.s[1], -u)},
                          params.beta * norm2});
  h.program.add_identity({"-P + gamma|x|^2 = s3 + s4 u_r",
                          {term(h.P, -one), term(h.s[2], -one), term(h.s[3], -u)},
                          -params.gamma * norm2});
  h.program.add_identity({"-grad(P).f - delta|x|^2 = s5 + s6 u_r",
                          {PolyTerm{h.P, -one, f}, term(h.s[4], -one), term(h.s[5], -u)},
                          params.delta * norm2});
  h.program.check_balanced();
  return h;
}

/// Recomputes the three identities and the Gram spectra from the polynomials
/// themselves. Throws ResidualTooLarge or GramNotPsd.
inline void validate_certificate(SosCertificate& cert, const VectorField& f, const CertificateTolerances& tol = {}) {
  const std::size_t n = f.dimension();
  if (cert.P.nvars() != n) throw ContractViolation("certificate: P has the wrong number of variables");
  if (!(cert.beta > 0.0 && cert.gamma > 0.0 && cert.delta > 0.0 && cert.radius > 0.0)) {
    throw ContractViolation("certificate: beta, gamma, delta, r must be positive");
  }
  if (cert.beta > cert.gamma) throw ContractViolation("certificate: beta exceeds gamma");
  const std::vector<double> origin(n, 0.0);
  if (cert.P.evaluate(origin) != 0.0) throw ContractViolation("certificate: P(0) != 0");

  const Polynomial u = Polynomial::ball(n, cert.radius);
  const Polynomial norm2 = Polynomial::squared_norm(n);
  std::array<Polynomial, 6> s;
  for (int k = 0; k < 6; ++k) {
    auto basis = cert.basis[k];
    basis.nvars = n;
    s[k] = gram_to_poly(cert.gram[k], basis);
    const double drift = coeff_max_abs_diff(s[k], cert.s[k]);
    if (drift > tol.identity_residual) {
      throw ResidualTooLarge("certificate: s" + std::to_string(k + 1) + " differs from its Gram image by " +
                             format_double(drift));
    }
  }
  cert.identity_residuals = {
      coeff_max_abs_diff(cert.P - cert.beta * norm2, s[0] + s[1] * u),
      coeff_max_abs_diff(-cert.P + cert.gamma * norm2, s[2] + s[3] * u),
      coeff_max_abs_diff(-lie_derivative(cert.P, f) - cert.delta * norm2, s[4] + s[5] * u),
  };
  for (int k = 0; k < 3; ++k) {
    if (!(cert.identity_residuals[k] <= tol.identity_residual)) {
      throw ResidualTooLarge("certificate: identity " + std::to_string(k + 1) + " residual " +
                             format_double(cert.identity_residuals[k]) + " exceeds " +
                             format_double(tol.identity_residual));
    }
  }
  cert.min_gram_eigenvalue = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 6; ++k) {
    if (cert.gram[k].size() == 0) continue;
    const Eigen::MatrixXd G = 0.5 * (cert.gram[k] + cert.gram[k].transpose());
    const double ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues()(0);
    cert.min_gram_eigenvalue = std::min(cert.min_gram_eigenvalue, ev);
    if (ev < -tol.gram_psd) {
      throw GramNotPsd("certificate: Gram matrix of s" + std::to_string(k + 1) + " has eigenvalue " +
                       format_double(ev));
    }
  }
}

inline SosCertificate extract_certificate(const HProgram& h, const CompiledSos& compiled, const SdpSolution& sol,
                                          const CertificateTolerances& tol = {}) {
  if (!sol.certified()) {
    throw ContractViolation(std::string("extract_certificate: solution status is ") + to_string(sol.status));
  }
  const SosValues vals = read_solution(h.program, compiled, sol);
  SosCertificate cert;
  cert.P = vals.free[static_cast<std::size_t>(h.P.index)];
  for (int k = 0; k < 6; ++k) {
    const auto idx = static_cast<std::size_t>(h.s[k].index);
    cert.s[k] = vals.sos[idx];
    cert.gram[k] = vals.grams[idx];
    cert.basis[k] = h.program.sos_vars()[idx].basis;
  }
  cert.beta = h.params.beta;
  cert.gamma = h.params.gamma;
  cert.delta = h.params.delta;
  cert.radius = h.radius;
  cert.degree = h.degree;
  validate_certificate(cert, h.field, tol);
  return cert;
}

// ---------------------------------------------------------------------------
// Sublevel containment L(P, a) in B_r(0)

/// Containment: sigma + s (a - P) = u_r with s SOS proves the whole sublevel
/// set {P <= a} lies in B_r. That needs P coercive, which a certificate that is
/// only constrained on B_r rarely is.
/// Sphere: P - a = sigma + lambda u_r with lambda free proves P > a on the
/// sphere |x| = r (sigma >= margin > 0 there), so the connected component of
/// {P <= a} through the origin cannot leave B_r.
enum class LevelForm { Containment, Sphere };

struct LevelProgram {
  SosProgram program{1};
  LevelForm form = LevelForm::Containment;
  VarRef sigma;
  VarRef multiplier;
};

inline LevelProgram build_level_program(const Polynomial& P, double a, double r, int d_mult,
                                        LevelForm form = LevelForm::Containment) {
  if (!(a > 0.0)) throw ContractViolation("build_level_program: level must be positive");
  if (!(r > 0.0)) throw ContractViolation("build_level_program: radius must be positive");
  if (d_mult < 0) throw DegreeImbalance("build_level_program: multiplier degree must be >= 0");
  const std::size_t n = P.nvars();
  LevelProgram lp;
  lp.program = SosProgram(n);
  lp.form = form;
  const Polynomial one = Polynomial::constant(n, 1.0);
  const Polynomial ur = Polynomial::ball(n, r);
  if (form == LevelForm::Containment) {
    const int mult_half = round_up_even(d_mult) / 2;
    const int sigma_degree = round_up_even(std::max(2, 2 * mult_half + P.degree()));
    lp.multiplier = lp.program.add_sos("s", MonomialBasis(n, mult_half));
    lp.sigma = lp.program.add_sos("sigma", MonomialBasis(n, sigma_degree / 2));
    lp.program.add_identity({"sigma + s (a - P) = u_r",
                             {PolyTerm{lp.sigma, one, std::nullopt},
                              PolyTerm{lp.multiplier, Polynomial::constant(n, a) - P, std::nullopt}},
                             ur});
  } else {
    const int sigma_degree = round_up_even(std::max(P.degree(), d_mult + 2));
    lp.multiplier = lp.program.add_free("lambda", monomials_up_to(n, d_mult));
    lp.sigma = lp.program.add_sos("sigma", MonomialBasis(n, sigma_degree / 2));
    lp.program.add_identity({"sigma + lambda u_r = P - a",
                             {PolyTerm{lp.sigma, one, std::nullopt}, PolyTerm{lp.multiplier, ur, std::nullopt}},
                             P - Polynomial::constant(n, a)});
  }
  lp.program.check_balanced();
  return lp;
}

}  // namespace roa
