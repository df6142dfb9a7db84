#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "divfree/fe_space.hpp"
#include "divfree/forms.hpp"
#include "divfree/linsolve.hpp"
#include "divfree/manufactured.hpp"

namespace divfree {

/// Which forcing enters the second RK stage: f(t^{n+1}) or the Taylor
/// extrapolation f(t^n) + tau df/dt(t^n).
enum class ForcingMode { Next, Taylor };
enum class IntegratorKind { ExplicitRk2, SemiImplicitCn };

std::string to_string(ForcingMode m);
std::string to_string(IntegratorKind k);

struct SchemeConfig {
  int degree = 1;
  double tau = 1.0 / 16.0;
  double final_time = 2.0;
  double nu = 0.0;
  double sigma = -1.0;  ///< SIP penalty; < 0 selects 10 k^2
  ForcingMode f_mode = ForcingMode::Taylor;
  IntegratorKind integrator = IntegratorKind::ExplicitRk2;
  /// Blow-up when ||u^n|| > blowup_factor * max(||u^0||, 1).
  double blowup_factor = 10.0;
  /// Run with f = 0 (energy identity diagnostics are recorded).
  bool zero_forcing = false;
  /// When > 0, stop after this many steps instead of at final_time.
  int max_steps = 0;
  /// Record per-step jump seminorms even for forced runs.
  bool record_jumps = false;
};

/// Number of steps N = max(1, round(T / tau)); the effective step is T / N.
int snap_steps(double final_time, double tau);

/// Spaces, constant matrices and the factorized projection for one
/// (mesh, degree). Not copyable or movable: the saddle system refers to the
/// spaces it was built from.
class Discretization {
 public:
  Discretization(std::shared_ptr<const Mesh> mesh, int degree, double sigma = -1.0);
  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;

  const Mesh& mesh() const { return *mesh_; }
  const RTSpace& rt() const { return rt_; }
  const ScalarDGSpace& multiplier() const { return q_; }
  const SaddleSystem& saddle() const { return saddle_; }
  const SparseMat& mass() const { return saddle_.mass(); }
  double sigma() const { return sigma_; }
  /// SIP matrix, assembled on first use.
  const SparseMat& sip() const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  RTSpace rt_;
  ScalarDGSpace q_;
  SaddleSystem saddle_;
  double sigma_;
  mutable std::unique_ptr<SparseMat> sip_;
};

struct StepState {
  int n = 0;
  double t = 0.0;
  CoefVec u;
  CoefVec u_prev;  ///< u^{n-1}; empty before the first step
};

/// Everything the RK step computes besides the new state.
struct Rk2Stages {
  CoefVec w;
  double jump_u = 0.0;  ///< |u^n|^2_{u^n,up}
  double jump_w = 0.0;  ///< |w^n|^2_{w^n,up}
  double projection_residual = 0.0;
};

enum class StepStatus { Ok, BlowUp };

struct StepResult {
  StepStatus status = StepStatus::Ok;
  StepState state;
  Rk2Stages stages;
  double l2_norm = 0.0;  ///< ||u^{n+1}||_{L2}
};

/// Forcing data passed to the steppers; a null problem or zero_forcing
/// means f = 0 and homogeneous boundary data.
struct StepContext {
  const Discretization& disc;
  const SchemeConfig& config;
  const ExactProblem* problem = nullptr;
  double tau = 0.0;
  double blowup_norm = 0.0;  ///< absolute threshold on ||u||_{L2}
  /// When > 0, t^n = final_time * (n / total_steps) so that t^N = T exactly;
  /// otherwise t^n = n tau.
  int total_steps = 0;
  double final_time = 0.0;
};

/// Time level n of a run driven by ctx.
double step_time(const StepContext& ctx, int n);

/// One step of the explicit second-order RK scheme (Euler/NS). Stage 1
/// projects M u - tau [nu (A u - g)] - tau c_h(u,u,.) + tau (f^n,.); stage 2
/// projects (M u + M w)/2 - tau/2 [nu (A w - g)] - tau/2 c_h(w,w,.)
/// + tau/2 (f_w,.). Blow-up is reported through the status, not thrown.
StepResult rk2_step(const StepContext& ctx, const StepState& state, bool compute_jumps);

/// One step of the semi-implicit CN comparator: semi-implicit Euler with
/// c_h(u^0, u^1, .) for n = 0, then CN with advecting field
/// 3/2 u^n - 1/2 u^{n-1}. Throws SolverError on a singular system.
StepResult cn_step(const StepContext& ctx, const StepState& state);

struct StepRecord {
  int step = 0;
  double t = 0.0;
  double l2_norm = 0.0;
  double div_norm = 0.0;
  std::optional<double> energy_residual;  ///< f = 0 explicit runs only
  std::optional<double> jump_u;
  std::optional<double> jump_w;
};

struct FinalErrors {
  double l2_norm = 0.0;
  double l2_error = 0.0;
  double h1_error = 0.0;
  double div_norm = 0.0;
};

/// Per-run diagnostics.
struct RunReport {
  SchemeConfig config;
  double tau = 0.0;       ///< effective step after snapping
  int num_steps = 0;      ///< planned steps
  double h = 0.0;         ///< nominal mesh size
  double h_max = 0.0;
  int num_cells = 0;
  int num_dofs = 0;
  double initial_l2_norm = 0.0;
  std::vector<StepRecord> steps;
  std::optional<int> blow_up_step;
  std::optional<FinalErrors> final_errors;
  CoefVec final_state;  ///< velocity after the last completed step
  double max_div_norm = 0.0;
  double max_relative_energy_residual = 0.0;  ///< max |res| / ||u^n||^2 (f = 0)
  double wall_seconds = 0.0;

  bool completed() const { return !blow_up_step.has_value(); }
};

/// Runs from u^0 = Pi_RT u(., 0) to T (or max_steps) and collects
/// diagnostics. `problem` supplies the initial data, the forcing (unless
/// config.zero_forcing) and the reference solution for final errors.
RunReport run(const SchemeConfig& config, const Discretization& disc, const ExactProblem& problem,
              double nominal_h = 0.0);
RunReport run(const SchemeConfig& config, std::shared_ptr<const Mesh> mesh, const ExactProblem& problem,
              double nominal_h = 0.0);

}  // namespace divfree
