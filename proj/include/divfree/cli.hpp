#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "divfree/diagnostics.hpp"

namespace divfree {

/// Effective settings of one CLI invocation after the config file, flags and
/// per-command defaults have been merged.
struct ExperimentConfig {
  std::string command;
  int k = 1;
  int n = 8;
  std::vector<int> n_list;
  std::optional<double> tau;
  std::vector<double> tau_list;
  CflForm cfl = CflForm::Standard;
  double co = 0.5;
  double nu = 0.0;
  double sigma = -1.0;
  double final_time = 2.0;
  double perturb = 0.2;
  std::uint64_t seed = 1;
  ForcingMode f_mode = ForcingMode::Taylor;
  IntegratorKind integrator = IntegratorKind::ExplicitRk2;
  bool f_zero = false;
  std::string out_dir = ".";
  std::string format = "both";
};

/// Parses "1/16", "0.0625" or "6.25e-2". Throws InputError otherwise or
/// when the value is not positive.
double parse_tau(const std::string& text);
/// Comma or whitespace separated list of positive integers.
std::vector<int> parse_int_list(const std::string& text);
/// Comma or whitespace separated list of time steps (parse_tau syntax).
std::vector<double> parse_tau_list(const std::string& text);

/// INI-style "key = value" lines describing cfg, one per setting.
std::string echo_config(const ExperimentConfig& cfg);

/// Entry point of the divfree tool. Returns the process exit code:
/// 0 success, 1 usage or I/O error, 2 blow-up in single-run.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace divfree
