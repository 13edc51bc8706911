#pragma once

// State types, system descriptions and the smooth dynamics of action-dependent
// mechanical systems: the Herglotz vector field on (q, qdot, z), the contact
// Hamiltonian vector field on (q, p, z), energy and the Legendre transform.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "herglotz/error.hpp"

namespace herglotz {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Lagrangian-side state (q, qdot, z) at physical time t.
struct ContactStateL {
  Vec q;
  Vec qdot;
  double z = 0.0;
  double t = 0.0;
};

/// Hamiltonian-side state (q, p, z) at physical time t, in Darboux coordinates.
struct ContactStateH {
  Vec q;
  Vec p;
  double z = 0.0;
  double t = 0.0;
};

/// Value and derivatives of L(q, qdot, z) at one point.
///
/// `hess_qdot` is W_ij = d2L/dqdot_i dqdot_j. `mixed_q(i, j)` is
/// d2L/dq_j dqdot_i and `mixed_z(i)` is d2L/dz dqdot_i.
struct LagrangianPartials {
  double value = 0.0;
  Vec d_q;
  Vec d_qdot;
  double d_z = 0.0;
  Mat hess_qdot;
  Mat mixed_q;
  Vec mixed_z;
};

struct HamiltonianPartials {
  double value = 0.0;
  Vec d_q;
  Vec d_p;
  double d_z = 0.0;
};

/// Data for L = 1/2 qdot^T M(q) qdot - V(q) - gamma z.
///
/// `mass_gradient`, when set, returns dM/dq_k for k = 0..n-1. When empty the
/// q-derivatives of M are taken by central differences of `mass`.
struct NaturalForm {
  std::function<Mat(const Vec&)> mass;
  std::function<double(const Vec&)> potential;
  std::function<Vec(const Vec&)> potential_gradient;
  std::function<std::vector<Mat>(const Vec&)> mass_gradient;
  double gamma = 0.0;
};

using LagrangianFn = std::function<double(const Vec& q, const Vec& qdot, double z)>;
using LagrangianPartialsFn =
    std::function<LagrangianPartials(const Vec& q, const Vec& qdot, double z)>;
using HamiltonianFn = std::function<double(const Vec& q, const Vec& p, double z)>;
using HamiltonianPartialsFn =
    std::function<HamiltonianPartials(const Vec& q, const Vec& p, double z)>;

/// A mechanical system described by its action-dependent Lagrangian.
///
/// If `partials` is empty, derivatives come from finite_difference_partials.
struct SystemSpec {
  int n = 0;
  LagrangianFn lagrangian;
  LagrangianPartialsFn partials;
  std::optional<NaturalForm> natural;
};

/// A contact Hamiltonian H(q, p, z). If `partials` is empty, derivatives come
/// from central differences of `hamiltonian`.
struct HamiltonianSpec {
  int n = 0;
  HamiltonianFn hamiltonian;
  HamiltonianPartialsFn partials;
  std::optional<NaturalForm> natural;
};

struct HerglotzRate {
  Vec qdot;
  Vec qddot;
  double zdot = 0.0;
};

struct HamiltonRate {
  Vec qdot;
  Vec pdot;
  double zdot = 0.0;
};

/// Natural-form system with analytic partials.
SystemSpec make_natural_system(int n, NaturalForm form);

/// System from a bare Lagrangian; `partials` may be empty to request the
/// finite-difference fallback.
SystemSpec make_lagrangian_system(int n, LagrangianFn lagrangian,
                                  LagrangianPartialsFn partials = {});

/// H = 1/2 p^T M(q)^{-1} p + V(q) + gamma z, the Legendre dual of the natural
/// form Lagrangian.
HamiltonianSpec make_natural_hamiltonian(int n, NaturalForm form);

HamiltonianSpec make_hamiltonian_system(int n, HamiltonianFn hamiltonian,
                                        HamiltonianPartialsFn partials = {});

/// Partials of L at s, analytic when available, otherwise finite differences.
LagrangianPartials evaluate_partials(const SystemSpec& sys, const ContactStateL& s);
HamiltonianPartials evaluate_partials(const HamiltonianSpec& sys, const ContactStateH& s);

/// Central differences: step cbrt(eps) * max(1, |x|) for first derivatives and
/// eps^(1/4) * max(1, |x|) for second derivatives. W is symmetrized.
LagrangianPartials finite_difference_partials(const SystemSpec& sys, const ContactStateL& s);
HamiltonianPartials finite_difference_partials(const HamiltonianSpec& sys,
                                               const ContactStateH& s);

/// E_L = qdot . dL/dqdot - L.
double lagrangian_energy(const SystemSpec& sys, const ContactStateL& s);

double hamiltonian_value(const HamiltonianSpec& sys, const ContactStateH& s);

/// Threshold below which |det W|^(1/n) counts as singular, relative to max|W_ij|.
inline constexpr double kRegularityTolerance = 1e-10;

/// Herglotz field on (q, qdot, z): dq/dt = qdot, dz/dt = L and qddot from
/// W qddot = dL/dq - (d2L/dq dqdot) qdot - (d2L/dz dqdot) L + (dL/dz) dL/dqdot.
HerglotzRate herglotz_rhs(const SystemSpec& sys, const ContactStateL& s);

/// Contact Hamiltonian field: (dH/dp, -dH/dq - p dH/dz, p . dH/dp - H).
HamiltonRate hamiltonian_rhs(const HamiltonianSpec& sys, const ContactStateH& s);

ContactStateH legendre_forward(const SystemSpec& sys, const ContactStateL& s);

/// Closed form qdot = M^{-1} p for natural systems, Newton on dL/dqdot = p
/// (seed qdot = p, at most 50 iterations) otherwise.
ContactStateL legendre_inverse(const SystemSpec& sys, const ContactStateH& s);

namespace detail {
void require_dimension(int n, const Vec& v, const char* what);
void require_finite(double x, const char* what);
void require_finite(const Vec& v, const char* what);
}  // namespace detail

}  // namespace herglotz
