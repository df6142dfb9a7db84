#include "divfree/integrators.hpp"

#include <chrono>
#include <cmath>

#include "divfree/diagnostics.hpp"

namespace divfree {

std::string to_string(ForcingMode m) { return m == ForcingMode::Next ? "next" : "taylor"; }
std::string to_string(IntegratorKind k) { return k == IntegratorKind::ExplicitRk2 ? "rk2" : "cn"; }

int snap_steps(double final_time, double tau) {
  if (!(tau > 0.0)) throw InputError("time step must be positive");
  if (!(final_time > 0.0)) throw InputError("final time must be positive");
  const long long n = std::llround(final_time / tau);
  return static_cast<int>(std::max(1LL, n));
}

Discretization::Discretization(std::shared_ptr<const Mesh> mesh, int degree, double sigma)
    : mesh_(std::move(mesh)),
      rt_(mesh_, degree),
      q_(mesh_, degree),
      saddle_(rt_, q_),
      sigma_(sigma < 0.0 ? default_sigma(degree) : sigma) {}

const SparseMat& Discretization::sip() const {
  if (!sip_) sip_ = std::make_unique<SparseMat>(assemble_sip(rt_, FormParams{sigma_, 1.0, -1}));
  return *sip_;
}

namespace {

double mass_norm(const SparseMat& m, const Eigen::VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(m * v))); }

bool forced(const StepContext& ctx) { return ctx.problem != nullptr && !ctx.config.zero_forcing; }

Eigen::VectorXd load_at(const StepContext& ctx, double t) {
  const auto& f = ctx.problem->forcing;
  return assemble_load(ctx.disc.rt(), [&](const Vec2& x) { return f(x, t); });
}

Eigen::VectorXd taylor_load(const StepContext& ctx, double t, double tau) {
  const auto& f = ctx.problem->forcing;
  const auto& ft = ctx.problem->forcing_dt;
  return assemble_load(ctx.disc.rt(), [&](const Vec2& x) { return Vec2(f(x, t) + tau * ft(x, t)); });
}

/// nu (A u - g(t)); g carries the exact boundary velocity in forced runs.
Eigen::VectorXd viscous(const StepContext& ctx, const Eigen::VectorXd& u, double t) {
  Eigen::VectorXd r = ctx.config.nu * (ctx.disc.sip() * u);
  if (forced(ctx)) {
    const auto& vel = ctx.problem->velocity;
    r -= ctx.config.nu * assemble_sip_boundary_load(ctx.disc.rt(), [&](const Vec2& x) { return vel(x, t); },
                                                    FormParams{ctx.disc.sigma(), ctx.config.nu, -1});
  }
  return r;
}

bool exceeded(const StepContext& ctx, const CoefVec& u, double norm) {
  return !u.is_finite() || !std::isfinite(norm) || norm > ctx.blowup_norm;
}

}  // namespace

double step_time(const StepContext& ctx, int n) {
  if (ctx.total_steps > 0) return ctx.final_time * (static_cast<double>(n) / ctx.total_steps);
  return n * ctx.tau;
}

StepResult rk2_step(const StepContext& ctx, const StepState& state, bool compute_jumps) {
  const RTSpace& space = ctx.disc.rt();
  const SparseMat& M = ctx.disc.mass();
  const double tau = ctx.tau;
  const double t_next = step_time(ctx, state.n + 1);
  const bool viscous_on = ctx.config.nu > 0.0;
  StepResult out;
  out.state.n = state.n + 1;
  out.state.t = t_next;
  out.state.u_prev = state.u;

  const Eigen::VectorXd Mu = M * state.u.values;
  Eigen::VectorXd rhs = Mu - tau * apply_convection(space, state.u, state.u);
  if (forced(ctx)) rhs += tau * load_at(ctx, state.t);
  if (viscous_on) rhs -= tau * viscous(ctx, state.u.values, state.t);

  double res1 = 0.0, res2 = 0.0;
  auto w = project_div_free(ctx.disc.saddle(), rhs, &res1);
  if (!w || exceeded(ctx, *w, mass_norm(M, w->values))) {
    out.status = StepStatus::BlowUp;
    out.state.u = w ? *w : space.zeros();
    return out;
  }

  rhs = 0.5 * Mu + 0.5 * (M * w->values) - 0.5 * tau * apply_convection(space, *w, *w);
  if (forced(ctx)) {
    rhs += 0.5 * tau *
           (ctx.config.f_mode == ForcingMode::Next ? load_at(ctx, t_next) : taylor_load(ctx, state.t, tau));
  }
  if (viscous_on) rhs -= 0.5 * tau * viscous(ctx, w->values, t_next);

  auto u_next = project_div_free(ctx.disc.saddle(), rhs, &res2);
  out.l2_norm = u_next ? mass_norm(M, u_next->values) : NAN;
  if (!u_next || exceeded(ctx, *u_next, out.l2_norm)) {
    out.status = StepStatus::BlowUp;
    out.state.u = u_next ? *u_next : space.zeros();
    return out;
  }
  out.state.u = std::move(*u_next);
  out.stages.w = std::move(*w);
  out.stages.projection_residual = std::max(res1, res2);
  if (compute_jumps) {
    out.stages.jump_u = jump_seminorm(space, state.u, state.u);
    out.stages.jump_w = jump_seminorm(space, out.stages.w, out.stages.w);
  }
  return out;
}

StepResult cn_step(const StepContext& ctx, const StepState& state) {
  const RTSpace& space = ctx.disc.rt();
  const SparseMat& M = ctx.disc.mass();
  const double tau = ctx.tau;
  const double nu = ctx.config.nu;
  const double t_next = step_time(ctx, state.n + 1);
  StepResult out;
  out.state.n = state.n + 1;
  out.state.t = t_next;
  out.state.u_prev = state.u;

  SparseMat block;
  Eigen::VectorXd rhs = (1.0 / tau) * (M * state.u.values);
  if (state.n == 0 || state.u_prev.values.size() == 0) {
    // Semi-implicit Euler start: c_h(u^0, u^1, v).
    block = (1.0 / tau) * M + convection_matrix(space, state.u);
    if (nu > 0.0) block += nu * ctx.disc.sip();
    if (forced(ctx)) rhs += load_at(ctx, t_next);
    if (nu > 0.0 && forced(ctx)) rhs -= viscous(ctx, Eigen::VectorXd::Zero(space.num_dofs()), t_next);
  } else {
    CoefVec a{space.tag(), 1.5 * state.u.values - 0.5 * state.u_prev.values};
    const SparseMat C = convection_matrix(space, a);
    SparseMat half = 0.5 * C;
    if (nu > 0.0) half += (0.5 * nu) * ctx.disc.sip();
    block = (1.0 / tau) * M + half;
    rhs -= half * state.u.values;
    if (forced(ctx)) rhs += 0.5 * (load_at(ctx, state.t) + load_at(ctx, t_next));
    if (nu > 0.0 && forced(ctx)) {
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(space.num_dofs());
      rhs -= 0.5 * (viscous(ctx, zero, state.t) + viscous(ctx, zero, t_next));
    }
  }
  const CNSystem sys(ctx.disc.saddle(), block);
  out.state.u = cn_solve(sys, space, rhs);
  out.l2_norm = mass_norm(M, out.state.u.values);
  if (exceeded(ctx, out.state.u, out.l2_norm)) out.status = StepStatus::BlowUp;
  return out;
}

RunReport run(const SchemeConfig& config, const Discretization& disc, const ExactProblem& problem, double nominal_h) {
  const auto start = std::chrono::steady_clock::now();
  if (config.degree != disc.rt().degree()) throw InputError("run: config degree differs from the discretization");
  if (config.nu < 0.0) throw InputError("run: viscosity must be non-negative");

  RunReport report;
  report.config = config;
  report.num_steps = snap_steps(config.final_time, config.tau);
  report.tau = config.final_time / report.num_steps;
  if (config.max_steps > 0) report.num_steps = std::min(report.num_steps, config.max_steps);
  report.h = nominal_h > 0.0 ? nominal_h : disc.mesh().h_max();
  report.h_max = disc.mesh().h_max();
  report.num_cells = disc.mesh().num_cells();
  report.num_dofs = disc.rt().num_dofs();

  const RTSpace& space = disc.rt();
  StepState state;
  state.u = rt_interpolate([&](const Vec2& x) { return problem.velocity(x, 0.0); }, space, BoundaryDofs::FromField);
  report.initial_l2_norm = std::sqrt(state.u.values.dot(disc.mass() * state.u.values));

  const int planned = snap_steps(config.final_time, config.tau);
  StepContext ctx{disc, config, &problem, report.tau,
                  config.blowup_factor * std::max(report.initial_l2_norm, 1.0), planned, config.final_time};
  const bool energy = config.zero_forcing && config.integrator == IntegratorKind::ExplicitRk2;
  const bool jumps = energy || config.record_jumps;

  for (int n = 0; n < report.num_steps; ++n) {
    StepResult r = config.integrator == IntegratorKind::ExplicitRk2 ? rk2_step(ctx, state, jumps) : cn_step(ctx, state);
    if (r.status == StepStatus::BlowUp) {
      report.blow_up_step = n + 1;
      break;
    }
    StepRecord rec;
    rec.step = r.state.n;
    rec.t = r.state.t;
    rec.l2_norm = r.l2_norm;
    // div RT_k lies in the multiplier space, whose basis is L2-orthonormal.
    rec.div_norm = (disc.saddle().div() * r.state.u.values).norm();
    if (jumps && config.integrator == IntegratorKind::ExplicitRk2) {
      rec.jump_u = r.stages.jump_u;
      rec.jump_w = r.stages.jump_w;
    }
    if (energy) {
      const double res = energy_residual(disc.mass(), state.u.values, r.stages.w.values, r.state.u.values,
                                         r.stages.jump_u, r.stages.jump_w, report.tau);
      rec.energy_residual = res;
      const double ref = state.u.values.dot(disc.mass() * state.u.values);
      if (ref > 0.0) report.max_relative_energy_residual = std::max(report.max_relative_energy_residual, std::abs(res) / ref);
      else report.max_relative_energy_residual = std::max(report.max_relative_energy_residual, std::abs(res));
    }
    report.max_div_norm = std::max(report.max_div_norm, rec.div_norm);
    report.steps.push_back(rec);
    state = std::move(r.state);
  }

  report.final_state = state.u;
  if (report.completed()) {
    FinalErrors fe;
    fe.l2_norm = l2_norm(space, state.u);
    fe.l2_error = l2_error(space, state.u, problem, state.t);
    fe.h1_error = h1_broken_error(space, state.u, problem, state.t);
    fe.div_norm = div_norm(space, state.u);
    report.final_errors = fe;
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

RunReport run(const SchemeConfig& config, std::shared_ptr<const Mesh> mesh, const ExactProblem& problem,
              double nominal_h) {
  const Discretization disc(std::move(mesh), config.degree, config.sigma);
  return run(config, disc, problem, nominal_h);
}

}  // namespace divfree
