#pragma once

// Trajectory CSV, SVG plots and JSON summaries.
//
// CSV columns, in order: t, q1..qn, v1..vn, z, E, ell, event_flag. v is the
// velocity (Lagrangian runs) or momentum (Hamiltonian runs); E is E_L or H;
// ell = q1 qdot2 - q2 qdot1 (0 when n = 1); event_flag is 0 for flow samples,
// 1 for pre-impact and 2 for post-impact limits. Numbers use 17 significant
// digits.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "herglotz/cli/config.hpp"
#include "herglotz/diagnostics.hpp"
#include "herglotz/hybrid.hpp"

namespace herglotz::cli {

struct CsvRow {
  SampleRow sample;
  double energy = 0.0;
  double ell = 0.0;
};

std::vector<std::string> csv_header(int n);

std::vector<CsvRow> tabulate(const HybridSystem& hs, const std::vector<SampleRow>& rows);

void write_csv(std::ostream& out, int n, const std::vector<CsvRow>& rows);

/// Throws Error(SchemaMismatch) on a bad header or row, naming the line.
std::vector<CsvRow> read_csv(std::istream& in, int n);

/// 800 x 800 plot of the boundary and the sampled (q1, q2) path.
void write_svg(std::ostream& out, const RunConfig& cfg, const std::vector<CsvRow>& rows);

Json to_json(const CheckReport& r);

/// Least-squares slope of log E against t over flow samples.
double fitted_decay_rate(const std::vector<CsvRow>& rows);

std::string format_double(double x);

}  // namespace herglotz::cli
