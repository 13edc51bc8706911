#pragma once

// Dissipative billiards L = 1/2 m |qdot|^2 - gamma z in a disk or an ellipse,
// and closed-form references for their free flight and impacts.

#include <variant>

#include "herglotz/hybrid.hpp"

namespace herglotz {

struct Circle {
  double radius = 1.0;
};

struct Ellipse {
  double a = 1.0;
  double b = 1.0;
};

struct BilliardSpec {
  std::variant<Circle, Ellipse> boundary = Circle{};
  double gamma = 0.0;
  double mass = 1.0;

  void validate() const;
};

NaturalForm billiard_natural_form(const BilliardSpec& spec);
SwitchingSurface billiard_surface(const BilliardSpec& spec);

/// h = r^2 - x^2 - y^2. Natural resolver in the Lagrangian formulation,
/// the Hamiltonian resolver otherwise.
HybridSystem make_circular_billiard(const BilliardSpec& spec,
                                    Formulation formulation = Formulation::Lagrangian);

/// h = 1 - (x/a)^2 - (y/b)^2.
HybridSystem make_elliptical_billiard(const BilliardSpec& spec,
                                      Formulation formulation = Formulation::Lagrangian);

/// Dispatches on the boundary alternative.
HybridSystem make_billiard(const BilliardSpec& spec,
                           Formulation formulation = Formulation::Lagrangian);

struct FreeParticleState {
  Vec position;
  Vec velocity;
  double z = 0.0;
};

/// Between-impact solution of qddot = -gamma qdot, zdot = L (T0 = m |v0|^2 / 2):
///   q(t) = q0 + v0 (1 - e^{-gamma t}) / gamma
///   z(t) = (E0/gamma) e^{-gamma t} - (T0/gamma) e^{-2 gamma t},  E0 = T0 + gamma z0
/// evaluated with expm1 so that gamma -> 0 is continuous. gamma = 0 uses the
/// linear limit.
FreeParticleState free_particle_closed_form(double gamma, const Vec& q0, const Vec& v0,
                                            double z0, double t, double mass = 1.0);

struct PlanarVelocity {
  double vx = 0.0;
  double vy = 0.0;
};

/// Reflection law on the unit circle in explicit polynomial form.
/// Requires |x^2 + y^2 - 1| <= 1e-9.
PlanarVelocity circular_impact_closed_form(double x, double y, double vx_minus, double vy_minus);

/// Reflection law on (x/a)^2 + (y/b)^2 = 1 in explicit polynomial form.
PlanarVelocity elliptical_impact_closed_form(double a, double b, double x, double y,
                                             double vx_minus, double vy_minus);

/// l = x ydot - y xdot (= r^2 thetadot) for a planar Lagrangian state.
double angular_quantity(const ContactStateL& s);

struct PolarRates {
  double r_dot = 0.0;
  double theta_dot = 0.0;
};

/// Radial and angular rates from Cartesian position and velocity.
PolarRates polar_rates(const Vec& q, const Vec& qdot);

}  // namespace herglotz
