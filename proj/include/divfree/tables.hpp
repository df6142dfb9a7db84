#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "divfree/diagnostics.hpp"

namespace divfree {

/// A time step or mesh size: "1/m" in Markdown, the decimal value in CSV.
struct Fraction {
  double value = 0.0;
};

/// A convergence rate or exponent: two decimals in Markdown.
struct Rate {
  std::optional<double> value;
};

/// Table cell: literal text, a number, a fraction or a rate. Missing or
/// non-finite numbers print as "nan".
using Cell = std::variant<std::string, std::optional<double>, Fraction, Rate>;

struct TableSection {
  std::string label;  ///< empty for an unlabelled single block
  std::vector<std::vector<Cell>> rows;
};

struct Table {
  std::vector<std::string> md_columns;   ///< Markdown headers
  std::vector<std::string> csv_columns;  ///< CSV headers (plain identifiers)
  std::vector<TableSection> sections;
};

/// Three significant digits, "%.2e" style; non-finite or missing -> "nan".
std::string format_sig3(std::optional<double> v);
/// Round-trip precision (17 significant digits); non-finite or missing -> "nan".
std::string format_full(std::optional<double> v);
/// Two decimals ("%.2f"); non-finite or missing -> "nan".
std::string format_rate(std::optional<double> v);
/// "1/m" when 1/tau is within 1e-9 of an integer, otherwise "%.6g".
std::string format_fraction(double tau);

/// Markdown table; labelled sections get a bold label row.
std::string render_markdown(const Table& table);
/// CSV with a header row and LF line endings. Labelled sections add a
/// leading "block" column.
std::string render_csv(const Table& table);

/// Final-time summary in the layout tau | ||u_h|| | L2 error | H1 error | div.
Table run_summary_table(const RunReport& report);
/// Per-step records of one run.
Table run_steps_table(const RunReport& report);
/// h | ||u_h|| | L2 error | rate | H1 error | rate, blown-up rows as "nan".
Table convergence_report(const ConvergenceTable& table);
/// h | tau_max | tau_max (decimal) | alpha | ||u_h|| | L2 error | H1 error.
Table sweep_report(const SweepResult& result);
/// Two stacked blocks of run summaries (explicit RK, then semi-implicit CN).
Table comparison_report(const std::vector<RunReport>& rk, const std::vector<RunReport>& cn);

}  // namespace divfree
