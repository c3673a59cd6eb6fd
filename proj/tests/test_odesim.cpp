#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "roa/odesim.hpp"

namespace roa {
namespace {

Polynomial x(std::size_t n, std::size_t i) { return Polynomial::variable(n, i); }
Polynomial c(std::size_t n, double v) { return Polynomial::constant(n, v); }

VectorField decay1() { return VectorField({-x(1, 0)}); }
VectorField reverse_van_der_pol() {
  return VectorField({-x(2, 1), x(2, 0) + x(2, 1) * (x(2, 0) * x(2, 0) - c(2, 1.0))});
}
VectorField van_der_pol() {
  return VectorField({x(2, 1), -x(2, 0) - x(2, 1) * (x(2, 0) * x(2, 0) - c(2, 1.0))});
}

double fixed_step_error(double h) {
  IntegratorOptions o;
  o.t_max = 1.0;
  o.fixed_step = h;
  o.early_exit = false;
  const Trajectory tr = integrate(decay1(), {1.0}, o);
  return std::abs(tr.final_state()[0] - std::exp(-1.0));
}

TEST(Integrate, ExponentialDecayEndpoint) {
  IntegratorOptions o;
  o.t_max = 1.0;
  o.early_exit = false;
  const Trajectory tr = integrate(decay1(), {1.0}, o);
  EXPECT_EQ(tr.final_time(), 1.0);
  EXPECT_NEAR(tr.final_state()[0], 0.367879441171442, 1e-6);
}

TEST(Integrate, FixedStepOrder) {
  const double e1 = fixed_step_error(0.1);
  const double e2 = fixed_step_error(0.05);
  EXPECT_GE(std::log2(e1 / e2), 4.0) << e1 << " " << e2;
}

TEST(Integrate, OriginIsAnEquilibrium) {
  IntegratorOptions o;
  o.early_exit = false;
  o.t_max = 10.0;
  o.record = true;
  const Trajectory tr = integrate(reverse_van_der_pol(), {0.0, 0.0}, o);
  for (const auto& s : tr.states) EXPECT_EQ(s, (std::vector<double>{0.0, 0.0}));
}

TEST(Integrate, Classification) {
  EXPECT_EQ(integrate(reverse_van_der_pol(), {3.0, 3.0}).verdict, Verdict::Diverged);
  EXPECT_EQ(integrate(reverse_van_der_pol(), {0.5, 0.5}).verdict, Verdict::ConvergedToOrigin);
  IntegratorOptions shortrun;
  shortrun.t_max = 0.1;
  EXPECT_EQ(integrate(reverse_van_der_pol(), {0.5, 0.5}, shortrun).verdict, Verdict::Undecided);
}

TEST(Integrate, RejectsBadInput) {
  EXPECT_THROW(integrate(decay1(), {std::numeric_limits<double>::quiet_NaN()}), ContractViolation);
  EXPECT_THROW(integrate(decay1(), {1.0, 2.0}), ContractViolation);
}

TEST(Integrate, StepUnderflowIsUndecided) {
  // x' = x^3 blows up at t = 1/2 from x0 = 1; forbid the tiny steps needed near it.
  IntegratorOptions o;
  o.escape_radius = 1e300;
  o.h_min = 1e-3;
  const Trajectory tr = integrate(VectorField({x(1, 0) * x(1, 0) * x(1, 0)}), {1.0}, o);
  EXPECT_EQ(tr.verdict, Verdict::Undecided);
  EXPECT_FALSE(tr.note.empty());
}

TEST(Integrate, TimeReversalConsistency) {
  IntegratorOptions fwd;
  fwd.t_max = 5.0;
  fwd.record = true;
  fwd.early_exit = false;
  fwd.atol = 1e-12;
  fwd.rtol = 1e-10;
  const std::vector<double> x0{0.7, -0.4};
  const Trajectory a = integrate(reverse_van_der_pol(), x0, fwd);
  IntegratorOptions bwd = fwd;
  bwd.t_max = -5.0;
  bwd.record = false;
  for (std::size_t k = 1; k < a.times.size(); k += 7) {
    bwd.t_max = -a.times[k];
    const Trajectory b = integrate(van_der_pol(), x0, bwd);
    EXPECT_NEAR(b.final_state()[0], a.states[k][0], 1e-5);
    EXPECT_NEAR(b.final_state()[1], a.states[k][1], 1e-5);
  }
}

TEST(ReferenceRoa, LinearStableIsAllInside) {
  const ReferenceRoa ref = reference_roa(VectorField({-x(2, 0), -x(2, 1)}), UniformGrid::centered(2, 2.0, 21));
  EXPECT_EQ(ref.inside, ref.grid.size());
  EXPECT_TRUE(ref.boundary().empty());
}

TEST(ReferenceRoa, AntistableKeepsOnlyTheOrigin) {
  const ReferenceRoa ref = reference_roa(VectorField({x(2, 0), x(2, 1)}), UniformGrid::centered(2, 1.0, 21));
  EXPECT_EQ(ref.inside, 1u);
  EXPECT_EQ(ref.labels[ref.origin_cell], CellLabel::Inside);
}

TEST(ReferenceRoa, VanDerPolIsBoundedByTheLimitCycle) {
  const ReferenceRoa ref = reference_roa(reverse_van_der_pol(), UniformGrid::centered(2, 3.0, 61));
  EXPECT_EQ(ref.labels[ref.origin_cell], CellLabel::Inside);
  EXPECT_GT(ref.inside, 0u);
  EXPECT_GT(ref.outside, 0u);
  const PointSet inside = ref.inside_points();
  for (std::size_t i = 0; i < inside.size(); ++i) {
    // The cycle stays within |x1| < 2.1 and |x2| < 2.7.
    EXPECT_LT(std::abs(inside[i][0]), 2.1);
    EXPECT_LT(std::abs(inside[i][1]), 2.7);
  }
  const ReferenceRoa again = reference_roa(reverse_van_der_pol(), UniformGrid::centered(2, 3.0, 61));
  EXPECT_EQ(again.labels, ref.labels);
}

TEST(ReferenceRoa, InsideCountGrowsWithHorizon) {
  const UniformGrid g = UniformGrid::centered(2, 1.0, 31);
  IntegratorOptions shortrun;
  shortrun.t_max = 3.0;
  const ReferenceRoa a = reference_roa(reverse_van_der_pol(), g, shortrun);
  const ReferenceRoa b = reference_roa(reverse_van_der_pol(), g);
  EXPECT_LE(a.inside, b.inside);
}

TEST(ExponentialDecay, Examples) {
  const std::vector<std::vector<double>> pts{{1.0}, {-0.5}, {2.0}};
  EXPECT_LE(check_exponential_decay(decay1(), pts, 1.0, 1.0, 5.0), 0.0);
  EXPECT_GT(check_exponential_decay(decay1(), pts, 0.5, 1.0, 5.0), 0.0);
  EXPECT_EQ(check_exponential_decay(decay1(), {}, 1.0, 1.0, 5.0), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(check_exponential_decay(decay1(), pts, 0.0, 1.0, 5.0), ContractViolation);
}

}  // namespace
}  // namespace roa
