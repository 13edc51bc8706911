#pragma once

// Velocity/momentum jump at the switching surface. The post-impact state
// keeps q, z and t, matches the momentum along every tangent direction of
// h^{-1}(0) and matches the energy; of the two roots the one reversing the
// normal velocity is selected.

#include "herglotz/contact_core.hpp"
#include "herglotz/surface.hpp"

namespace herglotz {

struct ImpactConfig {
  /// Maximum |h(q)| accepted at the impact point.
  double boundary_tol = 1e-12;
  double grazing_threshold = 1e-9;
  int max_iterations = 50;
  double newton_tol = 1e-12;
};

struct ImpactResiduals {
  /// max_k |(p+ - p-) . v_k| over an orthonormal tangent basis, relative to max(1, |p-|).
  double tangential = 0.0;
  /// |E+ - E-| relative to max(1, |E-|).
  double energy = 0.0;
};

template <class State>
struct ImpactResult {
  State state_plus;
  double lambda = 0.0;
  ImpactResiduals residuals;
};

using ImpactResultL = ImpactResult<ContactStateL>;
using ImpactResultH = ImpactResult<ContactStateH>;

/// Orthonormal basis of the complement of `normal`, as the columns of the
/// returned n x (n-1) matrix. Built from one Householder reflection.
Mat tangent_basis(const Vec& normal);

/// Closed form for natural systems: qdot+ = qdot- + lambda M^{-1} grad h with
/// lambda = -2 (grad h . qdot-) / (grad h^T M^{-1} grad h).
ImpactResultL resolve_impact_natural(const SystemSpec& sys, const ContactStateL& s_minus,
                                     const SwitchingSurface& surface,
                                     const ImpactConfig& cfg = {});

/// Newton solve of dL/dqdot(qdot+) - dL/dqdot(qdot-) = mu grad h together with
/// E_L(qdot+) = E_L(qdot-), seeded from the quadratic formula with M = W(qdot-).
ImpactResultL resolve_impact_newton(const SystemSpec& sys, const ContactStateL& s_minus,
                                    const SwitchingSurface& surface,
                                    const ImpactConfig& cfg = {});

/// p+ = p- + lambda grad h with H(q, p+, z) = H(q, p-, z), lambda != 0.
ImpactResultH resolve_impact_hamiltonian(const HamiltonianSpec& sys,
                                         const SwitchingSurface& surface,
                                         const ContactStateH& s_minus,
                                         const ImpactConfig& cfg = {});

}  // namespace herglotz
