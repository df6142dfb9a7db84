#include "divfree/tables.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <variant>

namespace divfree {

namespace {

bool present(std::optional<double> v) { return v.has_value() && std::isfinite(*v); }

std::string printf_string(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

template <class... F>
struct Overload : F... {
  using F::operator()...;
};

std::string md_cell(const Cell& c) {
  return std::visit(Overload{[](const std::string& s) { return s; },
                             [](const std::optional<double>& v) { return format_sig3(v); },
                             [](const Fraction& f) { return format_fraction(f.value); },
                             [](const Rate& r) { return format_rate(r.value); }},
                    c);
}

std::string csv_cell(const Cell& c) {
  return std::visit(Overload{[](const std::string& s) { return s; },
                             [](const std::optional<double>& v) { return format_full(v); },
                             [](const Fraction& f) { return format_full(f.value); },
                             [](const Rate& r) { return format_full(r.value); }},
                    c);
}

bool has_labels(const Table& t) {
  for (const auto& s : t.sections)
    if (!s.label.empty()) return true;
  return false;
}

std::optional<double> opt(double v) { return v; }

std::vector<Cell> summary_row(const RunReport& r) {
  std::vector<Cell> row{Fraction{r.tau}};
  if (r.final_errors) {
    row.insert(row.end(), {opt(r.final_errors->l2_norm), opt(r.final_errors->l2_error),
                           opt(r.final_errors->h1_error), opt(r.final_errors->div_norm)});
  } else {
    row.insert(row.end(), 4, std::optional<double>{});
  }
  return row;
}

const std::vector<std::string> kSummaryMd{"τ", "‖u_h‖_L2", "‖u − u_h‖_L2", "‖∇_h(u − u_h)‖_L2", "‖∇_h·u_h‖_L2"};
const std::vector<std::string> kSummaryCsv{"tau", "l2_norm", "l2_error", "h1_error", "div_norm"};

}  // namespace

std::string format_sig3(std::optional<double> v) {
  if (!present(v)) return "nan";
  return printf_string("%.2e", *v);
}

std::string format_full(std::optional<double> v) {
  if (!present(v)) return "nan";
  return printf_string("%.17g", *v);
}

std::string format_rate(std::optional<double> v) {
  if (!present(v)) return "nan";
  return printf_string("%.2f", *v);
}

std::string format_fraction(double tau) {
  if (tau > 0.0) {
    const double m = 1.0 / tau;
    const double r = std::round(m);
    if (r >= 1.0 && std::abs(m - r) <= 1e-9 * r) return "1/" + std::to_string(static_cast<long long>(r));
  }
  return printf_string("%.6g", tau);
}

std::string render_markdown(const Table& table) {
  std::ostringstream out;
  out << '|';
  for (const auto& c : table.md_columns) out << ' ' << c << " |";
  out << "\n|";
  for (size_t i = 0; i < table.md_columns.size(); ++i) out << " --- |";
  out << '\n';
  for (const auto& section : table.sections) {
    if (!section.label.empty()) {
      out << "| **" << section.label << "** |";
      for (size_t i = 1; i < table.md_columns.size(); ++i) out << "  |";
      out << '\n';
    }
    for (const auto& row : section.rows) {
      out << '|';
      for (const auto& cell : row) out << ' ' << md_cell(cell) << " |";
      out << '\n';
    }
  }
  return out.str();
}

std::string render_csv(const Table& table) {
  const bool labels = has_labels(table);
  std::ostringstream out;
  if (labels) out << "block,";
  for (size_t i = 0; i < table.csv_columns.size(); ++i) out << (i ? "," : "") << table.csv_columns[i];
  out << '\n';
  for (const auto& section : table.sections) {
    for (const auto& row : section.rows) {
      if (labels) out << section.label << ',';
      for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_cell(row[i]);
      out << '\n';
    }
  }
  return out.str();
}

Table run_summary_table(const RunReport& report) {
  Table t{kSummaryMd, kSummaryCsv, {}};
  t.sections.push_back({"", {summary_row(report)}});
  return t;
}

Table run_steps_table(const RunReport& report) {
  const bool energy = !report.steps.empty() && report.steps.front().energy_residual.has_value();
  const bool jumps = !report.steps.empty() && report.steps.front().jump_u.has_value();
  Table t;
  t.csv_columns = {"step", "t", "l2_norm", "div_norm"};
  if (jumps) t.csv_columns.insert(t.csv_columns.end(), {"jump_u", "jump_w"});
  if (energy) t.csv_columns.push_back("energy_residual");
  t.md_columns = t.csv_columns;
  TableSection s;
  for (const auto& rec : report.steps) {
    std::vector<Cell> row{std::to_string(rec.step), opt(rec.t), opt(rec.l2_norm), opt(rec.div_norm)};
    if (jumps) row.insert(row.end(), {rec.jump_u, rec.jump_w});
    if (energy) row.push_back(rec.energy_residual);
    s.rows.push_back(std::move(row));
  }
  t.sections.push_back(std::move(s));
  return t;
}

Table convergence_report(const ConvergenceTable& table) {
  Table t;
  t.md_columns = {"h", "τ", "‖u_h‖_L2", "‖u − u_h‖_L2", "Rate", "‖∇_h(u − u_h)‖_L2", "Rate", "‖∇_h·u_h‖_L2"};
  t.csv_columns = {"h", "tau", "l2_norm", "l2_error", "l2_rate", "h1_error", "h1_rate", "div_norm"};
  TableSection s;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const ConvergenceRow& r = table.rows[i];
    const std::optional<FinalErrors>& e = r.errors;
    auto rate = [&](const std::vector<std::optional<double>>& rates) -> Cell {
      if (i == 0) return std::string("-");
      return Rate{rates[i - 1]};
    };
    s.rows.push_back({Fraction{r.h}, Fraction{r.tau}, e ? opt(e->l2_norm) : std::nullopt,
                      e ? opt(e->l2_error) : std::nullopt, rate(table.l2_rates), e ? opt(e->h1_error) : std::nullopt,
                      rate(table.h1_rates), e ? opt(e->div_norm) : std::nullopt});
  }
  t.sections.push_back(std::move(s));
  return t;
}

Table sweep_report(const SweepResult& result) {
  Table t;
  t.md_columns = {"h", "τ_max", "τ_max (decimal)", "α", "‖u_h‖_L2", "‖u − u_h‖_L2", "‖∇_h(u − u_h)‖_L2"};
  t.csv_columns = {"h", "tau_max", "tau_max_value", "alpha", "l2_norm", "l2_error", "h1_error"};
  TableSection s;
  for (size_t i = 0; i < result.rows.size(); ++i) {
    const SweepRow& r = result.rows[i];
    std::vector<Cell> row{Fraction{r.h}};
    row.push_back(r.tau_max ? Cell(format_fraction(*r.tau_max)) : Cell(std::string("nan")));
    row.push_back(r.tau_max);
    row.push_back(i == 0 ? Cell(std::string("-")) : Cell(Rate{r.alpha}));
    row.push_back(r.errors ? opt(r.errors->l2_norm) : std::nullopt);
    row.push_back(r.errors ? opt(r.errors->l2_error) : std::nullopt);
    row.push_back(r.errors ? opt(r.errors->h1_error) : std::nullopt);
    s.rows.push_back(std::move(row));
  }
  t.sections.push_back(std::move(s));
  return t;
}

Table comparison_report(const std::vector<RunReport>& rk, const std::vector<RunReport>& cn) {
  Table t{kSummaryMd, kSummaryCsv, {}};
  TableSection a{"Explicit RK", {}}, b{"Semi-implicit CN", {}};
  for (const auto& r : rk) a.rows.push_back(summary_row(r));
  for (const auto& r : cn) b.rows.push_back(summary_row(r));
  t.sections.push_back(std::move(a));
  t.sections.push_back(std::move(b));
  return t;
}

}  // namespace divfree
