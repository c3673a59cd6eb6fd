#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "roa/odesim.hpp"
#include "roa/roa.hpp"

namespace roa {
namespace {

Polynomial x(std::size_t n, std::size_t i) { return Polynomial::variable(n, i); }
Polynomial c(std::size_t n, double v) { return Polynomial::constant(n, v); }

VectorField linear_stable() { return VectorField({-x(2, 0), -x(2, 1)}); }
VectorField antistable() { return VectorField({x(2, 0), x(2, 1)}); }
VectorField reverse_van_der_pol() {
  return VectorField({-x(2, 1), x(2, 0) + x(2, 1) * (x(2, 0) * x(2, 0) - c(2, 1.0))});
}

// A certificate shell around a given P, for the level and component stages.
SosCertificate shell(const Polynomial& P, double r, double beta = 1e-3, double gamma = 1e3, double delta = 1e-3) {
  SosCertificate cert;
  cert.P = P;
  cert.radius = r;
  cert.beta = beta;
  cert.gamma = gamma;
  cert.delta = delta;
  cert.degree = P.degree();
  return cert;
}

struct Mock {
  double threshold;
  int calls = 0;
  std::optional<double> operator()(double r) {
    ++calls;
    if (r <= threshold) return r;
    return std::nullopt;
  }
};

TEST(HOracle, Examples) {
  const HResult lin = h_oracle(linear_stable(), 2, 1.0);
  EXPECT_EQ(lin.outcome, HOutcome::Feasible) << lin.message;
  ASSERT_TRUE(lin.certificate.has_value());
  EXPECT_EQ(h_oracle(antistable(), 2, 0.5).outcome, HOutcome::Infeasible);
  EXPECT_EQ(h_oracle(reverse_van_der_pol().rescaled(1.0 / 3.0), 4, 10.0).outcome, HOutcome::Infeasible);
  EXPECT_THROW(h_oracle(linear_stable(), 2, 0.0), ContractViolation);
}

TEST(Bisection, MockThreshold) {
  Mock m{0.7};
  const auto res = bisect_radius(std::ref(m), 0.0, 2.0, 0.01);
  EXPECT_GE(res.r_best, 0.69);
  EXPECT_LE(res.r_best, 0.70);
  EXPECT_EQ(res.certificate, res.r_best);
  EXPECT_LE(res.trace.r_hi - res.trace.r_lo, 0.01);
  EXPECT_TRUE(res.trace.monotone());
}

TEST(Bisection, AlwaysInfeasibleThrows) {
  auto never = [](double) -> std::optional<double> { return std::nullopt; };
  EXPECT_THROW(bisect_radius(never, 0.0, 1.0, 1e-3), NoFeasibleRadius);
}

TEST(Bisection, AlwaysFeasibleReachesTheUpperAnchor) {
  auto always = [](double r) -> std::optional<double> { return r; };
  const auto res = bisect_radius(always, 0.0, 1.0, 1e-3);
  EXPECT_GE(res.r_best, 1.0 - 1e-3);
}

TEST(Bisection, RejectsBadBrackets) {
  auto always = [](double r) -> std::optional<double> { return r; };
  EXPECT_THROW(bisect_radius(always, 1.0, 0.5, 1e-3), ContractViolation);
  EXPECT_THROW(bisect_radius(always, 0.0, 1.0, 0.0), ContractViolation);
}

TEST(Bisection, MonotoneCheckOnRecordedSteps) {
  BisectionTrace<double> t;
  t.steps = {{0.5, true, 0.5}, {0.75, false, std::nullopt}, {0.6, true, 0.6}};
  EXPECT_TRUE(t.monotone());
  t.steps.push_back({0.55, false, std::nullopt});
  EXPECT_FALSE(t.monotone());
}

TEST(BisectionProperty, RandomThresholds) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 1.95);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = u(rng);
    const auto res = bisect_radius(Mock{t}, 0.0, 2.0, 1e-3);
    EXPECT_LE(std::abs(res.r_best - t), 1e-3);
    EXPECT_LE(res.certificate, t);
    for (const auto& s : res.trace.steps) EXPECT_EQ(s.feasible, s.r <= t);
  }
}

TEST(MaxLevel, DiskInDisk) {
  const LevelResult lvl = max_level(Polynomial::squared_norm(2), 1.0, 1e-3, -1, 1e3);
  EXPECT_TRUE(lvl.certified);
  EXPECT_GE(lvl.a, 0.99);
  EXPECT_LE(lvl.a, 1.0);
}

TEST(MaxLevel, EllipseInDisk) {
  const Polynomial P = 4.0 * x(2, 0) * x(2, 0) + x(2, 1) * x(2, 1);
  const LevelResult lvl = max_level(P, 1.0, 1e-3, -1, 1e3);
  EXPECT_GE(lvl.a, 0.99);
  EXPECT_LE(lvl.a, 1.0);
  const LevelResult contain = max_level(P, 1.0, 1e-3, 0, 1e3, LevelForm::Containment);
  EXPECT_GE(contain.a, 0.99);
  EXPECT_LE(contain.a, 1.0);
}

TEST(MaxLevel, ScalesWithP) {
  const Polynomial P = 4.0 * x(2, 0) * x(2, 0) + x(2, 1) * x(2, 1);
  const double a1 = max_level(P, 1.0, 1e-3, -1, 1e3).a;
  const double a2 = max_level(2.0 * P, 1.0, 1e-3, -1, 1e3).a;
  EXPECT_NEAR(a2, 2.0 * a1, 2e-3 * a2);
}

TEST(MaxLevel, NonPositiveSphereGivesZero) {
  const Polynomial P = x(2, 0) * x(2, 0) - x(2, 1) * x(2, 1);
  const LevelResult lvl = max_level(P, 1.0, 1e-3, -1, 1e3);
  EXPECT_FALSE(lvl.certified);
  EXPECT_EQ(lvl.a, 0.0);
  EXPECT_FALSE(lvl.diagnostic.empty());
}

TEST(VerifyComponent, UnitDiskArea) {
  const UniformGrid g = UniformGrid::centered(2, 1.05, 401);
  const RoaEstimate e = verify_component(shell(Polynomial::squared_norm(2), 1.0), linear_stable(), 1.0, g);
  EXPECT_NEAR(e.area(), std::numbers::pi, 0.02 * std::numbers::pi);
}

TEST(VerifyComponent, ZeroLevelIsTheOriginCell) {
  const RoaEstimate e = verify_component(shell(Polynomial::squared_norm(2), 1.0), linear_stable(), 0.0, 401);
  ASSERT_EQ(e.component.size(), 1u);
  EXPECT_EQ(e.component[0][0], 0.0);
  EXPECT_EQ(e.component[0][1], 0.0);
}

TEST(VerifyComponent, ViolationNamesThePoint) {
  // |x|^2 does not decrease along the antistable flow.
  EXPECT_THROW(verify_component(shell(Polynomial::squared_norm(2), 1.0), antistable(), 0.5, 41),
               SampledConditionViolated);
}

TEST(VerifyComponent, KeepsOnlyTheOriginComponent) {
  // P <= 0.5 has three lobes, around (0, 0) and (+-1.5, 0). The Lyapunov
  // checks are switched off through the tolerance; only connectivity matters.
  const Polynomial x1 = x(2, 0);
  const Polynomial x2 = x(2, 1);
  const Polynomial P = x1 * x1 * (x1 * x1 - c(2, 2.25)) * (x1 * x1 - c(2, 2.25)) + x2 * x2;
  const UniformGrid g = UniformGrid::centered(2, 2.0, 81);
  const RoaEstimate e = verify_component(shell(P, 2.0), linear_stable(), 0.5, g, 1e300);
  ASSERT_FALSE(e.component.empty());
  for (std::size_t i = 0; i < e.component.size(); ++i) EXPECT_LT(std::abs(e.component[i][0]), 1.0);
}

TEST(LevelOptimal, LinearSystem) {
  const auto lo = level_optimal_certificate(linear_stable(), 2, 1.0);
  ASSERT_TRUE(lo.has_value());
  EXPECT_GT(lo->a, 0.0);
  const LevelResult lvl = max_level(lo->certificate.P, 1.0, 1e-3, -1, 1e3);
  EXPECT_GE(lvl.a, lo->a * (1.0 - 1e-2));
}

TEST(EstimateRoa, LinearSystemFillsTheUnitDisk) {
  EstimateConfig cfg;
  cfg.resolution = 201;
  const RoaEstimate e = estimate_roa(linear_stable(), 2, cfg);
  EXPECT_GE(e.r_best, 1.0 - cfg.r_tol);
  EXPECT_NEAR(e.area(), std::numbers::pi * e.r_level * e.r_level, 0.05 * std::numbers::pi);
}

TEST(EstimateRoa, OddDegreeRoundsUp) {
  EstimateConfig cfg;
  cfg.resolution = 101;
  cfg.selection = CertificateSelection::LastFeasible;
  const RoaEstimate e = estimate_roa(linear_stable(), 3, cfg);
  EXPECT_EQ(e.requested_degree, 3);
  EXPECT_EQ(e.degree, 4);
}

TEST(EstimateRoa, AntistableHasNoRadius) {
  EstimateConfig cfg;
  cfg.r_tol = 1e-2;
  EXPECT_THROW(estimate_roa(antistable(), 2, cfg), NoFeasibleRadius);
}

TEST(EstimateRoa, VanDerPolDegreeFourIsInsideTheReference) {
  const VectorField f = reverse_van_der_pol().rescaled(1.0 / 3.0);
  EstimateConfig cfg;
  cfg.grid = UniformGrid::centered(2, 1.0, 101);
  const RoaEstimate e = estimate_roa(f, 4, cfg);
  ASSERT_FALSE(e.component.empty());
  EXPECT_TRUE(e.level_certified);
  const CompiledField cf(f);
  for (std::size_t i = 0; i < e.component.size(); ++i) {
    const std::vector<double> p(e.component[i].begin(), e.component[i].end());
    EXPECT_EQ(integrate(cf, p).verdict, Verdict::ConvergedToOrigin);
  }
}

TEST(EstimateRoa, ScalingPAndLevelTogetherKeepsD) {
  const VectorField f = reverse_van_der_pol().rescaled(1.0 / 3.0);
  const HResult h = h_oracle(f, 4, 0.5);
  ASSERT_TRUE(h.certificate.has_value());
  const LevelResult lvl = max_level(h.certificate->P, 0.5, 1e-3, -1, 1e3);
  const UniformGrid g = UniformGrid::centered(2, 0.6, 121);
  const RoaEstimate a = verify_component(*h.certificate, f, lvl.a, g);
  SosCertificate scaled = *h.certificate;
  scaled.P = 3.0 * scaled.P;
  scaled.beta *= 3.0;
  scaled.gamma *= 3.0;
  scaled.delta *= 3.0;
  const RoaEstimate b = verify_component(scaled, f, 3.0 * lvl.a, g);
  EXPECT_LE(hausdorff(a.component, b.component), g.diagonal());
}

}  // namespace
}  // namespace roa
