#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "divfree/integrators.hpp"

namespace divfree {

/// Residual of the discrete energy identity of one explicit RK step with
/// f = 0, all norms in the M inner product:
///   ||u^{n+1}||^2 - ||u^n||^2 + tau |u^n|^2_{up} + tau |w^n|^2_{up}
///   - ||u^{n+1} - w^n||^2.
double energy_residual(const SparseMat& mass, const Eigen::VectorXd& prev_u, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& next_u, double jump_u, double jump_w, double tau);

enum class CflForm {
  Standard,    ///< tau = Co h
  FourThirds,  ///< tau = Co h^{4/3}
  Search,      ///< largest stable tau = 1/m on an integer grid
};

std::string to_string(CflForm f);
double cfl_step(CflForm form, double co, double h);

/// Mesh and base scheme settings shared by every run of a study.
struct StudySetup {
  SchemeConfig scheme;  ///< tau is overridden per run
  double perturb = 0.2;
  std::uint64_t seed = 1;
  double nu = 0.0;
};

struct SweepTrial {
  int denominator = 0;  ///< tau = 1/denominator
  bool stable = false;
  std::optional<int> blow_up_step;
};

struct SweepRow {
  int n = 0;
  double h = 0.0;
  std::optional<double> tau_max;
  std::optional<int> denominator;  ///< set when tau_max = 1/denominator
  std::optional<double> alpha;     ///< vs. the previous row
  std::optional<FinalErrors> errors;
  std::vector<SweepTrial> trials;
};

struct SweepResult {
  CflForm form = CflForm::Search;
  double co = 0.5;
  int degree = 1;
  std::vector<SweepRow> rows;
};

/// Stability sweep over mesh sizes h = 1/n. Fixed forms run once per h;
/// search mode scans tau = 1/m for m = ceil(1/(co h)), +2, ... until the first
/// stable run, giving up below tau = 1e-5. A run is stable when it reaches T
/// with finite norms below the blow-up gate.
SweepResult cfl_sweep(const std::vector<int>& n_list, CflForm form, double co, const StudySetup& setup);

/// alpha = log(tau_prev / tau) / log(h_prev / h).
double fit_alpha(double h_prev, double tau_prev, double h, double tau);

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  double tau = 0.0;
  std::optional<int> blow_up_step;
  std::optional<FinalErrors> errors;
  double max_div_norm = 0.0;
};

struct ConvergenceTable {
  CflForm form = CflForm::FourThirds;
  double co = 1.0;
  int degree = 1;
  std::vector<ConvergenceRow> rows;
  std::vector<std::optional<double>> l2_rates;
  std::vector<std::optional<double>> h1_rates;
};

/// Runs the manufactured problem to T on h = 1/n for every n in n_list with
/// tau from the CFL form (Standard or FourThirds).
ConvergenceTable convergence_study(const std::vector<int>& n_list, CflForm form, double co, const StudySetup& setup);

/// Width used for independent runs: DIVFREE_THREADS if set, else the
/// hardware concurrency; always >= 1.
int parallel_width();

/// Runs fn(i) for i in [0, count) on up to `width` threads.
void parallel_for(int count, int width, const std::function<void(int)>& fn);

}  // namespace divfree
