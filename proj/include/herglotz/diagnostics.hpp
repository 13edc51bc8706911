#pragma once

// Post-hoc invariant checks. Every check recomputes its quantities from raw
// states, never from resolver output.

#include <functional>
#include <string>
#include <vector>

#include "herglotz/hybrid.hpp"

namespace herglotz {

struct CheckReport {
  std::string name;
  double max_violation = 0.0;
  /// Time of the largest violation.
  double location = 0.0;
  /// Row of the largest violation in the checked sample table, or -1.
  long row = -1;
  double tolerance = 0.0;
  bool passed = true;
  std::string detail;
};

inline constexpr double kFlowTolerance = 1e-7;
inline constexpr double kImpactTolerance = 1e-10;

/// Sampled quantity along a trajectory: f at each row and the relative rate
/// r with df/dt = r f.
using RowEvaluator = std::function<double(const SampleRow&)>;

/// Cumulative integral of `rate` over the rows, restarting quadratic fits at
/// impacts. rows must be time ordered.
std::vector<double> cumulative_rate_integral(const std::vector<SampleRow>& rows,
                                             const RowEvaluator& rate);

/// Compares f(row) to f(row 0) exp(int r dt); violation |f - ref| / |f(row 0)|
/// (absolute when f(row 0) = 0).
CheckReport check_dissipated_quantity(const std::vector<SampleRow>& rows, const RowEvaluator& f,
                                      const RowEvaluator& rate, double tol,
                                      std::string name = "dissipated_quantity");

/// check_dissipated_quantity with f = E_L (or H) of the system.
CheckReport check_energy_decay(const std::vector<SampleRow>& rows, const HybridSystem& hs,
                               double tol = kFlowTolerance);

CheckReport check_dissipated_quantity(const std::vector<SampleRow>& rows,
                                      const RowEvaluator& f, const HybridSystem& hs,
                                      double tol = kFlowTolerance);

/// Tangential-momentum and energy residuals of one event, recomputed with a
/// Gram-Schmidt tangent basis.
CheckReport check_impact_conditions(const ImpactEvent& event, const HybridSystem& hs,
                                    double tol = kImpactTolerance);

/// Worst impact over a trajectory.
CheckReport check_all_impacts(const HybridTrajectory& traj, const HybridSystem& hs,
                              double tol = kImpactTolerance);

/// dH/dt along X_H by central differences against -(dH/dz) H.
CheckReport check_contact_identities(const HamiltonianSpec& sys,
                                     const std::vector<ContactStateH>& states, double tol = 1e-6);

/// dE_L/dt along the Herglotz field by central differences against (dL/dz) E_L.
CheckReport check_energy_identity(const SystemSpec& sys, const std::vector<ContactStateL>& states,
                                  double tol = 1e-6);

}  // namespace herglotz
