#include <gtest/gtest.h>

#include <cmath>

#include "divfree/diagnostics.hpp"
#include "divfree/integrators.hpp"
#include "helpers.hpp"

using namespace divfree;
using divfree::testing::make_mesh;

namespace {

ExactProblem zero_problem() {
  ExactProblem z;
  z.velocity = [](const Vec2&, double) { return Vec2(0, 0); };
  z.velocity_gradient = [](const Vec2&, double) { return Mat2(Mat2::Zero()); };
  z.pressure = [](const Vec2&, double) { return 0.0; };
  z.velocity_dt = z.velocity;
  z.forcing = z.velocity;
  z.forcing_dt = z.velocity;
  return z;
}

ExactProblem scaled(const ExactProblem& p, double s) {
  ExactProblem q = p;
  q.velocity = [v = p.velocity, s](const Vec2& x, double t) { return Vec2(s * v(x, t)); };
  return q;
}

SchemeConfig config(int k, double tau, IntegratorKind kind = IntegratorKind::ExplicitRk2) {
  SchemeConfig c;
  c.degree = k;
  c.tau = tau;
  c.integrator = kind;
  return c;
}

double mass_distance(const Discretization& d, const CoefVec& a, const CoefVec& b) {
  const Eigen::VectorXd diff = a.values - b.values;
  return std::sqrt(diff.dot(d.mass() * diff));
}

}  // namespace

TEST(Steps, SnapToFinalTime) {
  EXPECT_EQ(snap_steps(2.0, 1.0 / 16), 32);
  EXPECT_EQ(snap_steps(2.0, 0.3), 7);
  EXPECT_EQ(snap_steps(2.0, 5.0), 1);
  EXPECT_THROW(snap_steps(2.0, 0.0), InputError);
  EXPECT_THROW(snap_steps(-1.0, 0.1), InputError);
}

TEST(Steps, FinalTimeIsExact) {
  const Discretization disc(make_mesh(4), 1);
  const ExactProblem tg = taylor_green();
  for (double tau : {0.07, 0.045, 1.0 / 30.0}) {
    for (double final_time : {2.0, 0.7}) {
      SchemeConfig c = config(1, tau);
      c.final_time = final_time;
      const RunReport r = run(c, disc, tg);
      ASSERT_TRUE(r.completed());
      ASSERT_EQ(static_cast<int>(r.steps.size()), r.num_steps);
      EXPECT_EQ(r.steps.back().t, final_time);
      EXPECT_NEAR(r.tau * r.num_steps, final_time, 1e-15);
      EXPECT_LE(std::abs(r.tau - tau), tau / 2 + 1e-15);
      for (size_t n = 0; n < r.steps.size(); ++n) EXPECT_NEAR(r.steps[n].t, (n + 1) * r.tau, 1e-14);
    }
  }
}

TEST(Trajectories, ZeroStaysZero) {
  const Discretization disc(make_mesh(4), 1);
  for (auto kind : {IntegratorKind::ExplicitRk2, IntegratorKind::SemiImplicitCn}) {
    SchemeConfig c = config(1, 0.1, kind);
    c.zero_forcing = true;
    c.max_steps = 5;
    const RunReport r = run(c, disc, zero_problem());
    ASSERT_TRUE(r.completed());
    ASSERT_EQ(r.steps.size(), 5u);
    for (const auto& s : r.steps) EXPECT_EQ(s.l2_norm, 0.0);
    EXPECT_EQ(r.final_state.values.norm(), 0.0);
  }
}

TEST(EnergyIdentity, HoldsEveryStep) {
  const Discretization disc(make_mesh(8), 1);
  SchemeConfig c = config(1, 1.0 / 32);
  c.zero_forcing = true;
  c.max_steps = 50;
  const RunReport r = run(c, disc, taylor_green());
  ASSERT_TRUE(r.completed());
  ASSERT_EQ(r.steps.size(), 50u);
  double prev = r.initial_l2_norm;
  for (const auto& s : r.steps) {
    ASSERT_TRUE(s.energy_residual.has_value());
    EXPECT_LE(std::abs(*s.energy_residual), 1e-10 * prev * prev);
    prev = s.l2_norm;
  }
  EXPECT_LE(r.max_relative_energy_residual, 1e-10);
}

// The residual of one step stays at roundoff relative to s^2 ||u0||^2.
TEST(EnergyIdentity, ScalesWithAmplitude) {
  const Discretization disc(make_mesh(8), 1);
  SchemeConfig c = config(1, 1.0 / 24);
  c.zero_forcing = true;
  c.max_steps = 1;
  const ExactProblem tg = taylor_green();
  for (double s : {0.25, 1.0, 4.0}) {
    const RunReport r = run(c, disc, scaled(tg, s));
    ASSERT_TRUE(r.completed());
    const double u0 = r.initial_l2_norm;
    EXPECT_NEAR(u0, s * run(c, disc, tg).initial_l2_norm, 1e-12 * u0);
    EXPECT_LE(std::abs(*r.steps[0].energy_residual), 1e-10 * u0 * u0) << "s=" << s;
  }
}

// Whenever ||u^{n+1} - w^n||^2 <= tau (|u^n|^2 + |w^n|^2) the norm does not grow.
TEST(EnergyIdentity, MonotoneUnderRestrictiveStep) {
  const Discretization disc(make_mesh(8), 1);
  SchemeConfig c = config(1, 1.0 / 64);
  c.zero_forcing = true;
  const double tau = c.tau;
  const ExactProblem tg = taylor_green();
  StepState state;
  state.u = rt_interpolate([&](const Vec2& x) { return tg.velocity(x, 0.0); }, disc.rt());
  const StepContext ctx{disc, c, nullptr, tau, 1e6};
  int checked = 0;
  for (int n = 0; n < 40; ++n) {
    const StepResult r = rk2_step(ctx, state, true);
    ASSERT_EQ(r.status, StepStatus::Ok);
    const Eigen::VectorXd d = r.state.u.values - r.stages.w.values;
    const double lhs = d.dot(disc.mass() * d);
    const double prev = std::sqrt(state.u.values.dot(disc.mass() * state.u.values));
    if (lhs <= tau * (r.stages.jump_u + r.stages.jump_w)) {
      ++checked;
      EXPECT_LE(r.l2_norm, prev * (1.0 + 1e-13)) << "step " << n;
    }
    state = r.state;
  }
  EXPECT_GT(checked, 30);
}

TEST(Explicit, DivergenceFreeEveryStep) {
  const Discretization disc(make_mesh(8), 2);
  SchemeConfig c = config(2, 1.0 / 40);
  c.max_steps = 10;
  const RunReport r = run(c, disc, taylor_green());
  ASSERT_TRUE(r.completed());
  for (const auto& s : r.steps) EXPECT_LE(s.div_norm, 1e-10);
  EXPECT_LE(r.final_errors->div_norm, 1e-10);
  for (int d : disc.rt().boundary_dofs()) EXPECT_EQ(r.final_state.values(d), 0.0);
}

TEST(Explicit, ErrorOnCoarseMesh) {
  // tau = h^{4/3} on the h = 1/8 mesh; reference value 4.77e-2.
  const Discretization disc(make_mesh(8), 1);
  const RunReport r = run(config(1, std::pow(1.0 / 8, 4.0 / 3.0)), disc, taylor_green(), 1.0 / 8);
  ASSERT_TRUE(r.completed());
  EXPECT_LE(r.max_div_norm, 1e-10);
  EXPECT_GE(r.final_errors->l2_error, 4.77e-2 / 2);
  EXPECT_LE(r.final_errors->l2_error, 4.77e-2 * 2);
}

TEST(Explicit, LargeStepBlowsUp) {
  const Discretization disc(make_mesh(8), 1);
  const RunReport r = run(config(1, 1.0 / 10), disc, taylor_green());
  ASSERT_FALSE(r.completed());
  EXPECT_FALSE(r.final_errors.has_value());
  EXPECT_EQ(static_cast<int>(r.steps.size()), *r.blow_up_step - 1);
  EXPECT_LT(*r.blow_up_step, r.num_steps + 1);
}

TEST(Explicit, ForcingModesAgreeAtOrder) {
  const Discretization disc(make_mesh(16), 1);
  SchemeConfig c = config(1, std::pow(1.0 / 16, 4.0 / 3.0));
  c.f_mode = ForcingMode::Taylor;
  const RunReport a = run(c, disc, taylor_green());
  c.f_mode = ForcingMode::Next;
  const RunReport b = run(c, disc, taylor_green());
  ASSERT_TRUE(a.completed() && b.completed());
  const double ea = a.final_errors->l2_error, eb = b.final_errors->l2_error;
  EXPECT_LE(std::abs(ea - eb), 0.2 * std::min(ea, eb));
}

TEST(Explicit, PressureRobustness) {
  const Discretization disc(make_mesh(8), 1);
  SchemeConfig c = config(1, 1.0 / 16);
  c.max_steps = 20;
  const ExactProblem tg = taylor_green();
  const ExactProblem shifted = with_gradient_forcing(
      tg, [](const Vec2& x) -> Vec2 { return {3.0 * std::cos(3.0 * x.x()) * std::cos(2.0 * x.y()), -2.0 * std::sin(3.0 * x.x()) * std::sin(2.0 * x.y())}; },
      [](const Vec2& x) { return std::sin(3.0 * x.x()) * std::cos(2.0 * x.y()); });
  const RunReport a = run(c, disc, tg);
  const RunReport b = run(c, disc, shifted);
  ASSERT_TRUE(a.completed() && b.completed());
  EXPECT_LE(mass_distance(disc, a.final_state, b.final_state), 1e-9);
}

TEST(Viscous, CompletesWithSmallViscosity) {
  const double h = 1.0 / 8;
  const Discretization disc(make_mesh(8), 1);
  SchemeConfig c = config(1, 0.25 * std::pow(h, 4.0 / 3.0));
  c.nu = 1e-3;
  const RunReport r = run(c, disc, taylor_green(1e-3), h);
  ASSERT_TRUE(r.completed());
  EXPECT_LE(r.max_div_norm, 1e-10);
  c.nu = 0.0;
  const RunReport e = run(c, disc, taylor_green(), h);
  EXPECT_LE(r.final_errors->l2_error, 3.0 * e.final_errors->l2_error);
}

TEST(Viscous, RejectsNegativeViscosity) {
  const Discretization disc(make_mesh(4), 1);
  SchemeConfig c = config(1, 0.1);
  c.nu = -1.0;
  EXPECT_THROW(run(c, disc, taylor_green()), InputError);
  EXPECT_THROW(run(config(2, 0.1), disc, taylor_green()), InputError);
}

TEST(CrankNicolson, CoarseStepIsStable) {
  // h = 1/8, tau = 1/12; reference value 1.38e-1.
  const Discretization disc(make_mesh(8), 1);
  const RunReport r = run(config(1, 1.0 / 12, IntegratorKind::SemiImplicitCn), disc, taylor_green(), 1.0 / 8);
  ASSERT_TRUE(r.completed());
  EXPECT_LE(r.max_div_norm, 1e-9);
  EXPECT_GE(r.final_errors->l2_error, 1.38e-1 / 2);
  EXPECT_LE(r.final_errors->l2_error, 1.38e-1 * 2);
}

TEST(CrankNicolson, HalvingTheStepSaturates) {
  const Discretization disc(make_mesh(8), 1);
  std::vector<double> e;
  for (double tau : {1.0 / 12, 1.0 / 24, 1.0 / 48}) {
    const RunReport r = run(config(1, tau, IntegratorKind::SemiImplicitCn), disc, taylor_green());
    ASSERT_TRUE(r.completed()) << tau;
    EXPECT_LE(r.max_div_norm, 1e-10);
    e.push_back(r.final_errors->l2_error);
  }
  EXPECT_LT(e[1], e[0]);
  EXPECT_LE(e[2], e[1] * 1.05);
  EXPECT_LT(std::abs(e[1] - e[2]), std::abs(e[0] - e[1]));
}
