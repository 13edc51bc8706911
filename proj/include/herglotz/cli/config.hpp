#pragma once

// Run configuration for the command-line front end. The on-disk format is
// JSON; see docs/config.md for the schema.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "herglotz/hybrid.hpp"

namespace herglotz::cli {

using Json = nlohmann::ordered_json;

enum class SystemKind { Circle, Ellipse, Natural };

struct RunConfig {
  SystemKind kind = SystemKind::Circle;
  double radius = 1.0;
  double a = 1.0;
  double b = 1.0;
  double gamma = 0.0;
  double mass = 1.0;

  // Custom natural form: L = 1/2 qdot^T M qdot - 1/2 q^T K q - gamma z inside
  // the ellipsoid sum (q_i / s_i)^2 <= 1.
  int n = 2;
  Mat mass_matrix;
  Mat stiffness;
  Vec semi_axes;

  Vec q0;
  std::optional<Vec> qdot0;
  std::optional<Vec> p0;
  double z0 = 0.0;
  double t_final = 0.0;

  Formulation formulation = Formulation::Lagrangian;
  std::optional<ResolverKind> resolver;
  HybridOptions options;

  std::string out_dir = "out";
  std::string name = "run";
  int samples = 2000;
  bool svg = true;

  double flow_tol = 1e-7;
  double impact_tol = 1e-10;

  /// The parsed document, echoed into summaries.
  Json source;
};

/// Throws Error(ConfigError) with the failing field path, or the line and
/// column for JSON syntax errors.
RunConfig parse_config(const Json& doc);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

HybridSystem build_system(const RunConfig& cfg);

/// Initial packed state [q, v, z] in the configured formulation. A velocity
/// given for a Hamiltonian run (or a momentum for a Lagrangian run) goes
/// through the Legendre transform.
Vec initial_state(const RunConfig& cfg);

std::string to_string(SystemKind kind);

}  // namespace herglotz::cli
