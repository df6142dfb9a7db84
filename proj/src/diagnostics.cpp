#include "divfree/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace divfree {

double energy_residual(const SparseMat& mass, const Eigen::VectorXd& prev_u, const Eigen::VectorXd& w,
                       const Eigen::VectorXd& next_u, double jump_u, double jump_w, double tau) {
  const Eigen::VectorXd diff = next_u - w;
  const double next_sq = next_u.dot(mass * next_u);
  const double prev_sq = prev_u.dot(mass * prev_u);
  const double diff_sq = diff.dot(mass * diff);
  return next_sq - prev_sq + tau * jump_u + tau * jump_w - diff_sq;
}

std::string to_string(CflForm f) {
  switch (f) {
    case CflForm::Standard: return "std";
    case CflForm::FourThirds: return "fourthirds";
    default: return "search";
  }
}

double cfl_step(CflForm form, double co, double h) {
  switch (form) {
    case CflForm::Standard: return co * h;
    case CflForm::FourThirds: return co * std::pow(h, 4.0 / 3.0);
    default: throw InputError("cfl_step: search mode has no closed-form step");
  }
}

double fit_alpha(double h_prev, double tau_prev, double h, double tau) {
  return std::log(tau_prev / tau) / std::log(h_prev / h);
}

int parallel_width() {
  int width = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DIVFREE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) width = v;
  }
  return std::max(1, width);
}

void parallel_for(int count, int width, const std::function<void(int)>& fn) {
  width = std::max(1, std::min(width, count));
  if (width == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mtx;
  std::vector<std::thread> pool;
  for (int t = 0; t < width; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mtx);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

std::shared_ptr<const Mesh> study_mesh(int n, const StudySetup& setup) {
  return std::make_shared<const Mesh>(build_structured(n, setup.perturb, setup.seed));
}

SchemeConfig with_tau(const StudySetup& setup, double tau) {
  SchemeConfig cfg = setup.scheme;
  cfg.tau = tau;
  cfg.nu = setup.nu;
  return cfg;
}

bool is_stable(const RunReport& r) {
  return r.completed() && r.final_errors && std::isfinite(r.final_errors->l2_error);
}

SweepRow search_row(int n, double co, const StudySetup& setup, const ExactProblem& problem) {
  SweepRow row;
  row.n = n;
  row.h = 1.0 / n;
  const Discretization disc(study_mesh(n, setup), setup.scheme.degree, setup.scheme.sigma);
  for (int m = static_cast<int>(std::ceil(1.0 / (co * row.h) - 1e-9)); 1.0 / m >= 1e-5; m += 2) {
    const RunReport r = run(with_tau(setup, 1.0 / m), disc, problem, row.h);
    SweepTrial trial{m, is_stable(r), r.blow_up_step};
    row.trials.push_back(trial);
    if (trial.stable) {
      row.tau_max = 1.0 / m;
      row.denominator = m;
      row.errors = r.final_errors;
      break;
    }
  }
  return row;
}

SweepRow fixed_row(int n, CflForm form, double co, const StudySetup& setup, const ExactProblem& problem) {
  SweepRow row;
  row.n = n;
  row.h = 1.0 / n;
  const double tau = cfl_step(form, co, row.h);
  const RunReport r = run(with_tau(setup, tau), study_mesh(n, setup), problem, row.h);
  row.trials.push_back({0, is_stable(r), r.blow_up_step});
  if (is_stable(r)) {
    row.tau_max = r.tau;
    row.errors = r.final_errors;
  }
  return row;
}

}  // namespace

SweepResult cfl_sweep(const std::vector<int>& n_list, CflForm form, double co, const StudySetup& setup) {
  if (n_list.empty()) throw InputError("cfl_sweep: empty mesh list");
  SweepResult result;
  result.form = form;
  result.co = co;
  result.degree = setup.scheme.degree;
  const ExactProblem problem = taylor_green(setup.nu);
  std::vector<int> sorted = n_list;
  std::sort(sorted.begin(), sorted.end());
  result.rows.resize(sorted.size());
  parallel_for(static_cast<int>(sorted.size()), parallel_width(), [&](int i) {
    result.rows[i] = form == CflForm::Search ? search_row(sorted[i], co, setup, problem)
                                             : fixed_row(sorted[i], form, co, setup, problem);
  });
  for (size_t i = 1; i < result.rows.size(); ++i) {
    const SweepRow& prev = result.rows[i - 1];
    SweepRow& row = result.rows[i];
    if (prev.tau_max && row.tau_max) row.alpha = fit_alpha(prev.h, *prev.tau_max, row.h, *row.tau_max);
  }
  return result;
}

ConvergenceTable convergence_study(const std::vector<int>& n_list, CflForm form, double co, const StudySetup& setup) {
  if (n_list.empty()) throw InputError("convergence_study: empty mesh list");
  if (form == CflForm::Search) throw InputError("convergence_study: use std or fourthirds time steps");
  ConvergenceTable table;
  table.form = form;
  table.co = co;
  table.degree = setup.scheme.degree;
  const ExactProblem problem = taylor_green(setup.nu);
  std::vector<int> sorted = n_list;
  std::sort(sorted.begin(), sorted.end());
  table.rows.resize(sorted.size());
  parallel_for(static_cast<int>(sorted.size()), parallel_width(), [&](int i) {
    ConvergenceRow& row = table.rows[i];
    row.n = sorted[i];
    row.h = 1.0 / row.n;
    const RunReport r = run(with_tau(setup, cfl_step(form, co, row.h)), study_mesh(row.n, setup), problem, row.h);
    row.tau = r.tau;
    row.blow_up_step = r.blow_up_step;
    row.errors = r.final_errors;
    row.max_div_norm = r.max_div_norm;
  });
  std::vector<double> h, e2, e1;
  for (const auto& row : table.rows) {
    h.push_back(row.h);
    e2.push_back(row.errors ? row.errors->l2_error : NAN);
    e1.push_back(row.errors ? row.errors->h1_error : NAN);
  }
  table.l2_rates = rate_table(h, e2);
  table.h1_rates = rate_table(h, e1);
  return table;
}

}  // namespace divfree
