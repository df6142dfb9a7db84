#include "divfree/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "divfree/tables.hpp"

namespace divfree {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == '[' || ch == ']' || ch == '"') {
      if (!cur.empty()) items.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) items.push_back(cur);
  return items;
}

double parse_number(const std::string& text, const std::string& what) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw InputError("invalid " + what + " \"" + text + "\"");
  }
  if (pos != text.size()) throw InputError("invalid " + what + " \"" + text + "\"");
  return v;
}

// Shortest decimal text that reads back to the same double.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& fmt) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

CflForm parse_cfl(const std::string& s) {
  if (s == "std") return CflForm::Standard;
  if (s == "fourthirds") return CflForm::FourThirds;
  if (s == "search") return CflForm::Search;
  throw InputError("unknown CFL form \"" + s + "\" (expected std, fourthirds or search)");
}

double default_co(CflForm form, int k) {
  if (form == CflForm::FourThirds) return k == 1 ? 1.0 : 0.04;
  return 0.5;
}

struct RawOptions {
  std::optional<int> k, n;
  std::optional<std::vector<std::string>> n_list, tau_list;
  std::optional<std::string> tau, cfl, f_mode, integrator, format, out_dir;
  std::optional<double> co, nu, sigma, final_time, perturb;
  std::optional<std::uint64_t> seed;
  bool f_zero = false;
};

ExperimentConfig resolve(const std::string& command, const RawOptions& raw) {
  ExperimentConfig cfg;
  cfg.command = command;
  cfg.k = raw.k.value_or(1);
  if (cfg.k != 1 && cfg.k != 2) {
    throw InputError("unsupported polynomial degree k = " + std::to_string(cfg.k) + " (supported degrees: 1, 2)");
  }
  cfg.n = raw.n.value_or(8);
  if (cfg.n < 2) throw InputError("--n must be at least 2");
  if (raw.n_list) {
    cfg.n_list = parse_int_list(CLI::detail::join(*raw.n_list, ","));
    if (cfg.n_list.empty()) throw InputError("empty mesh list given to --n-list");
  } else if (command == "convergence") {
    cfg.n_list = {8, 16, 32, 64};
  } else if (command == "cfl-sweep") {
    cfg.n_list = {5, 10, 20, 40};
  }
  for (int n : cfg.n_list)
    if (n < 2) throw InputError("mesh list entries must be at least 2");
  if (raw.tau) cfg.tau = parse_tau(*raw.tau);
  if (raw.tau_list) {
    cfg.tau_list = parse_tau_list(CLI::detail::join(*raw.tau_list, ","));
    if (cfg.tau_list.empty()) throw InputError("empty time step list given to --tau-list");
  } else if (command == "compare-cn") {
    for (int m = 12; m <= 24; m += 2) cfg.tau_list.push_back(1.0 / m);
  }
  if (raw.cfl) {
    cfg.cfl = parse_cfl(*raw.cfl);
  } else {
    cfg.cfl = command == "convergence" ? CflForm::FourThirds
              : command == "cfl-sweep" ? CflForm::Search
                                       : CflForm::Standard;
  }
  if (command == "convergence" && cfg.cfl == CflForm::Search) {
    throw InputError("convergence needs --cfl std or fourthirds");
  }
  if (command == "single-run" && cfg.cfl == CflForm::Search) {
    throw InputError("single-run needs --tau or --cfl std/fourthirds");
  }
  cfg.co = raw.co.value_or(default_co(cfg.cfl, cfg.k));
  if (!(cfg.co > 0.0)) throw InputError("--co must be positive");
  cfg.nu = raw.nu.value_or(0.0);
  if (cfg.nu < 0.0) throw InputError("--nu must be non-negative");
  cfg.sigma = raw.sigma.value_or(default_sigma(cfg.k));
  if (!(cfg.sigma > 0.0)) throw InputError("--sigma must be positive");
  cfg.final_time = raw.final_time.value_or(2.0);
  if (!(cfg.final_time > 0.0)) throw InputError("--T must be positive");
  cfg.perturb = raw.perturb.value_or(0.2);
  if (cfg.perturb < 0.0 || cfg.perturb > 0.3) throw InputError("--perturb must lie in [0, 0.3]");
  cfg.seed = raw.seed.value_or(1);
  if (raw.f_mode) {
    if (*raw.f_mode == "next") cfg.f_mode = ForcingMode::Next;
    else if (*raw.f_mode == "taylor") cfg.f_mode = ForcingMode::Taylor;
    else throw InputError("unknown --f-mode \"" + *raw.f_mode + "\" (expected next or taylor)");
  }
  if (raw.integrator) {
    if (*raw.integrator == "rk2") cfg.integrator = IntegratorKind::ExplicitRk2;
    else if (*raw.integrator == "cn") cfg.integrator = IntegratorKind::SemiImplicitCn;
    else throw InputError("unknown --integrator \"" + *raw.integrator + "\" (expected rk2 or cn)");
  }
  cfg.f_zero = raw.f_zero;
  cfg.out_dir = raw.out_dir.value_or(".");
  cfg.format = raw.format.value_or("both");
  if (cfg.format != "csv" && cfg.format != "md" && cfg.format != "both") {
    throw InputError("unknown --format \"" + cfg.format + "\" (expected csv, md or both)");
  }
  return cfg;
}

SchemeConfig scheme_of(const ExperimentConfig& cfg) {
  SchemeConfig s;
  s.degree = cfg.k;
  s.final_time = cfg.final_time;
  s.nu = cfg.nu;
  s.sigma = cfg.sigma;
  s.f_mode = cfg.f_mode;
  s.integrator = cfg.integrator;
  s.zero_forcing = cfg.f_zero;
  return s;
}

StudySetup study_of(const ExperimentConfig& cfg) {
  StudySetup s;
  s.scheme = scheme_of(cfg);
  s.perturb = cfg.perturb;
  s.seed = cfg.seed;
  s.nu = cfg.nu;
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
  if (!f) throw InputError("failed writing " + path.string());
}

class Output {
 public:
  Output(const ExperimentConfig& cfg, std::ostream& out) : cfg_(cfg), out_(out), dir_(cfg.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw InputError("cannot create output directory " + dir_.string() + ": " + ec.message());
    const std::string echo = echo_config(cfg);
    out_ << echo << '\n';
    write_file(dir_ / (stem() + ".config.ini"), echo);
  }

  void table(const std::string& name, const std::string& title, const Table& t) {
    const std::string md = "## " + title + "\n\n" + render_markdown(t);
    out_ << md << '\n';
    if (cfg_.format != "md") write_file(dir_ / (name + ".csv"), render_csv(t));
    if (cfg_.format != "csv") md_ += md + "\n";
  }

  void finish() {
    if (cfg_.format == "csv") return;
    write_file(dir_ / (stem() + ".md"), "```ini\n" + echo_config(cfg_) + "```\n\n" + md_);
  }

 private:
  std::string stem() const {
    std::string s = cfg_.command;
    for (char& c : s)
      if (c == '-') c = '_';
    return s;
  }

  const ExperimentConfig& cfg_;
  std::ostream& out_;
  std::filesystem::path dir_;
  std::string md_;
};

int cmd_single_run(const ExperimentConfig& cfg, std::ostream& out) {
  const double h = 1.0 / cfg.n;
  SchemeConfig scheme = scheme_of(cfg);
  scheme.tau = cfg.tau ? *cfg.tau : cfl_step(cfg.cfl, cfg.co, h);
  Output o(cfg, out);
  auto mesh = std::make_shared<const Mesh>(build_structured(cfg.n, cfg.perturb, cfg.seed));
  const RunReport r = run(scheme, mesh, taylor_green(cfg.nu), h);
  o.table("single_run_summary", "Final-time summary", run_summary_table(r));
  const std::string steps = render_csv(run_steps_table(r));
  if (cfg.format != "md") write_file(std::filesystem::path(cfg.out_dir) / "single_run_steps.csv", steps);
  o.finish();
  out << "steps " << r.steps.size() << "/" << r.num_steps << ", tau " << num(r.tau) << ", max div norm "
      << num(r.max_div_norm);
  if (cfg.f_zero && cfg.integrator == IntegratorKind::ExplicitRk2)
    out << ", max relative energy residual " << num(r.max_relative_energy_residual);
  out << '\n';
  if (!r.completed()) {
    out << "blow-up detected at step " << *r.blow_up_step << '\n';
    return 2;
  }
  return 0;
}

int cmd_convergence(const ExperimentConfig& cfg, std::ostream& out) {
  Output o(cfg, out);
  const ConvergenceTable t = convergence_study(cfg.n_list, cfg.cfl, cfg.co, study_of(cfg));
  o.table("convergence", "Convergence (k = " + std::to_string(cfg.k) + ", " + to_string(cfg.cfl) + ", Co = " +
                             num(cfg.co) + ")",
          convergence_report(t));
  o.finish();
  return 0;
}

int cmd_cfl_sweep(const ExperimentConfig& cfg, std::ostream& out) {
  Output o(cfg, out);
  const SweepResult r = cfl_sweep(cfg.n_list, cfg.cfl, cfg.co, study_of(cfg));
  o.table("cfl_sweep", "Maximum stable time steps (k = " + std::to_string(cfg.k) + ")", sweep_report(r));
  o.finish();
  return 0;
}

int cmd_compare_cn(const ExperimentConfig& cfg, std::ostream& out) {
  Output o(cfg, out);
  auto mesh = std::make_shared<const Mesh>(build_structured(cfg.n, cfg.perturb, cfg.seed));
  const Discretization disc(mesh, cfg.k, cfg.sigma);
  const ExactProblem problem = taylor_green(cfg.nu);
  std::vector<RunReport> rk, cn;
  for (double tau : cfg.tau_list) {
    SchemeConfig s = scheme_of(cfg);
    s.tau = tau;
    s.integrator = IntegratorKind::ExplicitRk2;
    rk.push_back(run(s, disc, problem, 1.0 / cfg.n));
    s.integrator = IntegratorKind::SemiImplicitCn;
    cn.push_back(run(s, disc, problem, 1.0 / cfg.n));
  }
  o.table("compare_cn", "Explicit RK vs semi-implicit CN (h = 1/" + std::to_string(cfg.n) + ")",
          comparison_report(rk, cn));
  o.finish();
  return 0;
}

}  // namespace

double parse_tau(const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  if (const auto slash = t.find('/'); slash != std::string::npos) {
    const double a = parse_number(trim(t.substr(0, slash)), "time step");
    const double b = parse_number(trim(t.substr(slash + 1)), "time step");
    if (b == 0.0) throw InputError("invalid time step \"" + text + "\"");
    v = a / b;
  } else {
    v = parse_number(t, "time step");
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw InputError("time step must be positive: \"" + text + "\"");
  return v;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> v;
  for (const auto& item : split_list(text)) {
    const double d = parse_number(item, "mesh size");
    if (d != std::floor(d) || d < 1 || d > 1e6) throw InputError("invalid mesh subdivision count \"" + item + "\"");
    v.push_back(static_cast<int>(d));
  }
  return v;
}

std::vector<double> parse_tau_list(const std::string& text) {
  std::vector<double> v;
  for (const auto& item : split_list(text)) v.push_back(parse_tau(item));
  return v;
}

std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream s;
  s << "command = " << cfg.command << '\n';
  s << "k = " << cfg.k << '\n';
  if (cfg.command == "single-run" || cfg.command == "compare-cn") s << "n = " << cfg.n << '\n';
  if (!cfg.n_list.empty())
    s << "n-list = " << join<int>(cfg.n_list, [](const int& n) { return std::to_string(n); }) << '\n';
  if (cfg.tau) s << "tau = " << num(*cfg.tau) << '\n';
  if (!cfg.tau_list.empty())
    s << "tau-list = " << join<double>(cfg.tau_list, [](const double& t) { return format_fraction(t); }) << '\n';
  if (!cfg.tau) s << "cfl = " << to_string(cfg.cfl) << "\nco = " << num(cfg.co) << '\n';
  s << "nu = " << num(cfg.nu) << '\n';
  s << "sigma = " << num(cfg.sigma) << '\n';
  s << "T = " << num(cfg.final_time) << '\n';
  s << "perturb = " << num(cfg.perturb) << '\n';
  s << "seed = " << cfg.seed << '\n';
  s << "f-mode = " << to_string(cfg.f_mode) << '\n';
  s << "integrator = " << to_string(cfg.integrator) << '\n';
  s << "f-zero = " << (cfg.f_zero ? "true" : "false") << '\n';
  s << "out-dir = " << cfg.out_dir << '\n';
  s << "format = " << cfg.format << '\n';
  return s.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Divergence-free H(div) DG solver for incompressible flow: runs and convergence/stability studies",
               "divfree"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI file of key = value settings; command-line flags take precedence");

  RawOptions raw;
  app.add_option("--k", raw.k, "Polynomial degree (1 or 2)");
  app.add_option("--n", raw.n, "Subdivisions per side for single-run and compare-cn (h = 1/n)");
  auto* n_list_opt = app.add_option("--n-list", raw.n_list, "Comma-separated subdivision counts for studies")->delimiter(',');
  app.add_option("--tau", raw.tau, "Time step, e.g. 1/16 or 0.0625");
  auto* tau_list_opt = app.add_option("--tau-list", raw.tau_list, "Comma-separated time steps for compare-cn")->delimiter(',');
  app.add_option("--cfl", raw.cfl, "Time step rule: std (Co h), fourthirds (Co h^{4/3}) or search");
  app.add_option("--co", raw.co, "CFL constant");
  app.add_option("--nu", raw.nu, "Viscosity (0 = Euler)");
  app.add_option("--sigma", raw.sigma, "Interior penalty parameter (default 10 k^2)");
  app.add_option("--T", raw.final_time, "Final time");
  app.add_option("--perturb", raw.perturb, "Interior vertex perturbation in units of h, in [0, 0.3]");
  app.add_option("--seed", raw.seed, "Mesh perturbation seed");
  app.add_option("--f-mode", raw.f_mode, "Second-stage forcing: next or taylor");
  app.add_option("--integrator", raw.integrator, "single-run integrator: rk2 or cn");
  app.add_option("--out-dir", raw.out_dir, "Directory for CSV/Markdown output");
  app.add_option("--format", raw.format, "Output files: csv, md or both");
  app.add_flag("--f-zero", raw.f_zero, "Run with zero forcing and record the energy identity residual");

  auto* single = app.add_subcommand("single-run", "One run of the manufactured problem");
  auto* conv = app.add_subcommand("convergence", "Error and rate table over a list of meshes");
  auto* sweep = app.add_subcommand("cfl-sweep", "Largest stable time step per mesh");
  auto* compare = app.add_subcommand("compare-cn", "Explicit RK vs semi-implicit CN over a list of time steps");

  std::vector<std::string> argv_store{"divfree"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  // An explicitly given but empty list must not fall back to the defaults.
  if (n_list_opt->count() > 0 && !raw.n_list) raw.n_list.emplace();
  if (tau_list_opt->count() > 0 && !raw.tau_list) raw.tau_list.emplace();

  std::string command;
  for (auto* sub : {single, conv, sweep, compare})
    if (sub->parsed()) command = sub->get_name();

  try {
    const ExperimentConfig cfg = resolve(command, raw);
    if (command == "single-run") return cmd_single_run(cfg, out);
    if (command == "convergence") return cmd_convergence(cfg, out);
    if (command == "cfl-sweep") return cmd_cfl_sweep(cfg, out);
    return cmd_compare_cn(cfg, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace divfree
