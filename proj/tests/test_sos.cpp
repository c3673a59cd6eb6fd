#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "roa/sdpa.hpp"
#include "roa/sos.hpp"

namespace roa {
namespace {

Polynomial x(std::size_t n, std::size_t i) { return Polynomial::variable(n, i); }
Polynomial c(std::size_t n, double v) { return Polynomial::constant(n, v); }

VectorField linear_stable() { return VectorField({-x(2, 0), -x(2, 1)}); }
VectorField antistable() { return VectorField({x(2, 0), x(2, 1)}); }
VectorField reverse_van_der_pol() {
  return VectorField({-x(2, 1), x(2, 0) + x(2, 1) * (x(2, 0) * x(2, 0) - c(2, 1.0))});
}

SosCertificate certify(const VectorField& f, int d, double r, const CertificateParams& params = {}) {
  const HProgram h = build_h_program(f, d, r, params);
  const CompiledSos compiled = compile(h.program);
  const SdpSolution sol = solve(compiled.problem);
  EXPECT_TRUE(sol.certified()) << sol.message;
  return extract_certificate(h, compiled, sol);
}

std::vector<double> sample_ball(std::mt19937_64& rng, std::size_t n, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  for (;;) {
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) {
      v = u(rng);
      s += v * v;
    }
    if (s <= r * r) return p;
  }
}

TEST(GramToPoly, IdentityGram) {
  MonomialBasis b;
  b.nvars = 1;
  b.monomials = monomials_up_to(1, 1);
  const Polynomial p = gram_to_poly(Eigen::MatrixXd::Identity(2, 2), b);
  EXPECT_EQ(coeff_max_abs_diff(p, c(1, 1.0) + x(1, 0) * x(1, 0)), 0.0);
}

TEST(GramToPoly, RankOne) {
  const MonomialBasis b(2, 1, 1);
  const Polynomial p = gram_to_poly(Eigen::MatrixXd::Ones(2, 2), b);
  const Polynomial s = x(2, 0) + x(2, 1);
  EXPECT_EQ(coeff_max_abs_diff(p, s * s), 0.0);
}

TEST(GramToPoly, ZeroAndMismatch) {
  const MonomialBasis b(2, 1, 1);
  EXPECT_TRUE(gram_to_poly(Eigen::MatrixXd::Zero(2, 2), b).is_zero());
  EXPECT_THROW(gram_to_poly(Eigen::MatrixXd::Zero(3, 3), b), ContractViolation);
}

TEST(Compile, SingleSosIdentity) {
  SosProgram prog(1);
  const VarRef s = prog.add_sos("sigma", MonomialBasis(1, 1));
  prog.add_identity({"sigma = 1 + x1^2", {PolyTerm{s, c(1, 1.0), std::nullopt}}, c(1, 1.0) + x(1, 0) * x(1, 0)});
  const CompiledSos compiled = compile(prog);
  EXPECT_EQ(compiled.problem.constraints.size(), 3u);
  const SdpSolution sol = solve(compiled.problem);
  ASSERT_TRUE(sol.certified()) << sol.message;
  EXPECT_LE((sol.X[0] - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Compile, EmptyProgramIsFeasible) {
  const CompiledSos compiled = compile(SosProgram(2));
  EXPECT_TRUE(compiled.problem.constraints.empty());
  EXPECT_EQ(solve(compiled.problem).status, SdpStatus::Feasible);
}

TEST(Compile, DegreeMismatchIsRejected) {
  SosProgram prog(1);
  const VarRef s = prog.add_sos("sigma", MonomialBasis(1, 1));
  prog.add_identity({"sigma = x1^4", {PolyTerm{s, c(1, 1.0), std::nullopt}}, x(1, 0) * x(1, 0) * x(1, 0) * x(1, 0)});
  EXPECT_THROW(compile(prog), DegreeImbalance);
}

TEST(HProgram, LinearSystemQuadraticWitness) {
  const CertificateParams params{0.1, 10.0, 0.1};
  SosCertificate cert = certify(linear_stable(), 2, 1.0, params);
  for (double r : cert.identity_residuals) EXPECT_LE(r, 1e-6);
  EXPECT_GE(cert.min_gram_eigenvalue, -1e-8);
  EXPECT_EQ(cert.degree, 2);

  // The hand witness P = |x|^2 with constant multipliers also validates.
  SosCertificate hand = cert;
  hand.P = Polynomial::squared_norm(2);
  const double diag[6] = {0.9, 0.0, 9.0, 0.0, 1.9, 0.0};
  for (int k = 0; k < 6; ++k) {
    hand.gram[k] = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hand.basis[k].size()),
                                         static_cast<Eigen::Index>(hand.basis[k].size()));
    for (std::size_t i = 0; i < hand.basis[k].size(); ++i) {
      if (hand.basis[k][i].degree() == 1) hand.gram[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[k];
    }
    MonomialBasis b = hand.basis[k];
    b.nvars = 2;
    hand.s[k] = gram_to_poly(hand.gram[k], b);
  }
  EXPECT_NO_THROW(validate_certificate(hand, linear_stable()));
}

TEST(HProgram, RejectsBadArguments) {
  EXPECT_THROW(build_h_program(linear_stable(), 2, 0.0), ContractViolation);
  EXPECT_THROW(build_h_program(linear_stable(), 2, -1.0), ContractViolation);
  EXPECT_THROW(build_h_program(linear_stable(), 2, 1.0, {2.0, 1.0, 1e-3}), ContractViolation);
  EXPECT_THROW(build_h_program(linear_stable(), 2, 1.0, {}, std::array<int, 6>{2, 0, 2, 0, 0, 0}),
               DegreeImbalance);
}

TEST(HProgram, VanDerPolDegreeBookkeeping) {
  const HProgram h = build_h_program(reverse_van_der_pol(), 2, 0.5);
  // grad(P).f has degree 2 + 3 - 1 = 4, so s5 needs quadratic half-basis monomials.
  EXPECT_EQ(h.multiplier_degrees[4], 4);
  EXPECT_EQ(h.multiplier_degrees[5], 2);
  const auto& b5 = h.program.sos_vars()[static_cast<std::size_t>(h.s[4].index)].basis;
  EXPECT_EQ(b5.max_degree(), 2);
}

TEST(HProgram, OddDegreeRoundsUp) {
  const HProgram h = build_h_program(linear_stable(), 3, 1.0);
  EXPECT_EQ(h.requested_degree, 3);
  EXPECT_EQ(h.degree, 4);
}

TEST(HProgram, AntistableIsInfeasible) {
  const HProgram h = build_h_program(antistable(), 2, 0.5);
  const SdpSolution sol = solve(compile(h.program).problem);
  EXPECT_EQ(sol.status, SdpStatus::Infeasible) << sol.message;
}

TEST(HProgram, TermOrderDoesNotChangeCompilation) {
  const Polynomial a = x(2, 0) * x(2, 0) * x(2, 1);
  const Polynomial b = -x(2, 1);
  const Polynomial cst = x(2, 0);
  const VectorField f1({-x(2, 1), cst + a + b});
  const VectorField f2({-x(2, 1), b + a + cst});
  EXPECT_EQ(export_sdpa(compile(build_h_program(f1, 4, 0.5).program).problem),
            export_sdpa(compile(build_h_program(f2, 4, 0.5).program).problem));
}

TEST(Extract, PerturbedGramIsRejected) {
  const CertificateParams params{0.1, 10.0, 0.1};
  const HProgram h = build_h_program(linear_stable(), 2, 1.0, params);
  const CompiledSos compiled = compile(h.program);
  SdpSolution sol = solve(compiled.problem);
  ASSERT_TRUE(sol.certified());
  EXPECT_NO_THROW(extract_certificate(h, compiled, sol));
  sol.X[0](0, 0) += 1e-3;
  EXPECT_THROW(extract_certificate(h, compiled, sol), ResidualTooLarge);
}

TEST(Extract, NonPsdGramIsRejected) {
  SosCertificate cert = certify(linear_stable(), 2, 1.0, {0.1, 10.0, 0.1});
  // Push s1's Gram to min eigenvalue -1e-6 and rebuild P from identity (i).
  MonomialBasis b = cert.basis[0];
  b.nvars = 2;
  const auto I = Eigen::MatrixXd::Identity(cert.gram[0].rows(), cert.gram[0].cols());
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cert.gram[0]).eigenvalues()(0);
  cert.gram[0] -= (lmin + 1e-6) * I;
  cert.s[0] = gram_to_poly(cert.gram[0], b);
  cert.P = cert.beta * Polynomial::squared_norm(2) + cert.s[0] + cert.s[1] * Polynomial::ball(2, cert.radius);
  EXPECT_THROW(validate_certificate(cert, linear_stable(), {1e6, 1e-8}), GramNotPsd);
}

TEST(Extract, InfeasibleStatusIsAPreconditionError) {
  const HProgram h = build_h_program(linear_stable(), 2, 1.0);
  const CompiledSos compiled = compile(h.program);
  SdpSolution sol;
  sol.status = SdpStatus::Infeasible;
  EXPECT_THROW(extract_certificate(h, compiled, sol), ContractViolation);
}

TEST(Certificate, SampledLyapunovInequalities) {
  std::mt19937_64 rng(7);
  struct Case {
    VectorField f;
    int d;
    double r;
  };
  for (const auto& cs : {Case{linear_stable(), 2, 1.0}, Case{reverse_van_der_pol(), 4, 0.5}}) {
    const SosCertificate cert = certify(cs.f, cs.d, cs.r);
    const CompiledPolynomial P(cert.P);
    const CompiledPolynomial lie(lie_derivative(cert.P, cs.f));
    for (int i = 0; i < 10000; ++i) {
      const auto p = sample_ball(rng, 2, cs.r);
      const double n2 = p[0] * p[0] + p[1] * p[1];
      ASSERT_GE(P(p), cert.beta * n2 - 1e-6);
      ASSERT_LE(P(p), cert.gamma * n2 + 1e-6);
      ASSERT_LE(lie(p), -cert.delta * n2 + 1e-6);
    }
  }
}

TEST(SosProperty, GramRoundTrip) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    const MonomialBasis basis(2, 2);
    const auto m = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd L(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) L(i, j) = g(rng);
    const Eigen::MatrixXd G = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(m, m);
    const Polynomial target = gram_to_poly(G, basis);
    SosProgram prog(2);
    const VarRef s = prog.add_sos("sigma", basis);
    prog.add_identity({"sigma = target", {PolyTerm{s, c(2, 1.0), std::nullopt}}, target});
    const CompiledSos compiled = compile(prog);
    const SdpSolution sol = solve(compiled.problem);
    ASSERT_TRUE(sol.certified()) << sol.message;
    const SosValues vals = read_solution(prog, compiled, sol);
    EXPECT_LE(coeff_max_abs_diff(vals.sos[0], target), 1e-7);
  }
}

TEST(LevelProgram, ContainmentExamples) {
  const Polynomial P = Polynomial::squared_norm(2);
  auto status = [&](double a, LevelForm form) {
    const LevelProgram lp = build_level_program(P, a, 1.0, 0, form);
    return solve(compile(lp.program).problem).status;
  };
  EXPECT_EQ(status(0.25, LevelForm::Containment), SdpStatus::Feasible);
  EXPECT_EQ(status(4.0, LevelForm::Containment), SdpStatus::Infeasible);
  EXPECT_EQ(status(0.25, LevelForm::Sphere), SdpStatus::Feasible);
  EXPECT_EQ(status(4.0, LevelForm::Sphere), SdpStatus::Infeasible);
}

TEST(LevelProgram, RejectsBadArguments) {
  const Polynomial P = Polynomial::squared_norm(2);
  EXPECT_THROW(build_level_program(P, 0.0, 1.0, 0), ContractViolation);
  EXPECT_THROW(build_level_program(P, 1.0, 0.0, 0), ContractViolation);
  EXPECT_THROW(build_level_program(P, 1.0, 1.0, -1), DegreeImbalance);
}

}  // namespace
}  // namespace roa
