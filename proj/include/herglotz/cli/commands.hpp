#pragma once

// Subcommands of the `herglotz` tool. Each returns the process exit status:
// 0 success, 2 a check failed (or the run stopped early), 1 an error.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "herglotz/cli/config.hpp"
#include "herglotz/cli/output.hpp"

namespace herglotz::cli {

/// Checks shared by simulate and check, run on a sample table. Impact checks
/// use consecutive pre/post rows.
std::vector<CheckReport> run_checks(const RunConfig& cfg, const HybridSystem& hs,
                                    const std::vector<CsvRow>& rows);

struct SimulateResult {
  int exit_code = 1;
  Json summary;
};

/// Writes <out_dir>/<name>.csv, <name>.json and optionally <name>.svg.
SimulateResult cmd_simulate(const RunConfig& cfg, std::ostream& log);

struct ImpactTestArgs {
  std::string geometry = "circle";
  double radius = 1.0;
  double a = 1.0;
  double b = 1.0;
  std::vector<double> q;
  std::vector<double> v;
  double gamma = 0.0;
  double mass = 1.0;
};

int cmd_impact_test(const ImpactTestArgs& args, std::ostream& out, std::ostream& err);

/// Re-runs the diagnostics on a CSV written by simulate; prints a JSON report.
int cmd_check(const std::filesystem::path& csv, const RunConfig& cfg, std::ostream& out,
              std::ostream& err);

/// Runs the config once per value of "sweep": {"parameter": <JSON pointer>,
/// "values": [...]} on `jobs` threads and writes <out_dir>/sweep.json.
int cmd_sweep(const Json& doc, const std::optional<std::string>& out_dir, int jobs,
              std::ostream& out, std::ostream& err);

int run_main(int argc, char** argv);
int run_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace herglotz::cli
