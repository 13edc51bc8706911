#include "herglotz/systems.hpp"

#include <cmath>
#include <string>

namespace herglotz {

namespace {

constexpr double kBoundaryTol = 1e-9;

void require_planar(const Vec& v, const char* what) {
  if (v.size() != 2) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " must be planar");
  }
}

}  // namespace

void BilliardSpec::validate() const {
  if (const auto* c = std::get_if<Circle>(&boundary)) {
    if (!(c->radius > 0.0) || !std::isfinite(c->radius)) {
      throw Error(ErrorKind::InvalidSpec, "radius must be positive");
    }
  } else {
    const auto& e = std::get<Ellipse>(boundary);
    if (!(e.a > 0.0) || !std::isfinite(e.a)) {
      throw Error(ErrorKind::InvalidSpec, "ellipse semiaxis a must be positive");
    }
    if (!(e.b > 0.0) || !std::isfinite(e.b)) {
      throw Error(ErrorKind::InvalidSpec, "ellipse semiaxis b must be positive");
    }
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw Error(ErrorKind::InvalidSpec, "gamma must be non-negative");
  }
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw Error(ErrorKind::InvalidSpec, "mass must be positive");
  }
}

NaturalForm billiard_natural_form(const BilliardSpec& spec) {
  spec.validate();
  const double m = spec.mass;
  NaturalForm form;
  form.mass = [m](const Vec&) { return Mat(m * Mat::Identity(2, 2)); };
  form.mass_gradient = [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(2, 2)); };
  form.potential = [](const Vec&) { return 0.0; };
  form.potential_gradient = [](const Vec&) { return Vec(Vec::Zero(2)); };
  form.gamma = spec.gamma;
  return form;
}

SwitchingSurface billiard_surface(const BilliardSpec& spec) {
  spec.validate();
  SwitchingSurface s;
  if (const auto* c = std::get_if<Circle>(&spec.boundary)) {
    const double r2 = c->radius * c->radius;
    s.h = [r2](const Vec& q) { return r2 - q[0] * q[0] - q[1] * q[1]; };
    s.grad_h = [](const Vec& q) {
      Vec g(2);
      g << -2.0 * q[0], -2.0 * q[1];
      return g;
    };
  } else {
    const auto e = std::get<Ellipse>(spec.boundary);
    const double ia2 = 1.0 / (e.a * e.a);
    const double ib2 = 1.0 / (e.b * e.b);
    s.h = [ia2, ib2](const Vec& q) { return 1.0 - q[0] * q[0] * ia2 - q[1] * q[1] * ib2; };
    s.grad_h = [ia2, ib2](const Vec& q) {
      Vec g(2);
      g << -2.0 * q[0] * ia2, -2.0 * q[1] * ib2;
      return g;
    };
  }
  return s;
}

HybridSystem make_billiard(const BilliardSpec& spec, Formulation formulation) {
  const NaturalForm form = billiard_natural_form(spec);
  HybridSystem hs;
  hs.n = 2;
  hs.formulation = formulation;
  hs.surface = billiard_surface(spec);
  if (formulation == Formulation::Lagrangian) {
    hs.lagrangian = make_natural_system(2, form);
    hs.resolver = ResolverKind::Natural;
  } else {
    hs.hamiltonian = make_natural_hamiltonian(2, form);
    hs.resolver = ResolverKind::Hamiltonian;
  }
  return hs;
}

HybridSystem make_circular_billiard(const BilliardSpec& spec, Formulation formulation) {
  if (!std::holds_alternative<Circle>(spec.boundary)) {
    throw Error(ErrorKind::InvalidSpec, "circular billiard needs a circular boundary");
  }
  return make_billiard(spec, formulation);
}

HybridSystem make_elliptical_billiard(const BilliardSpec& spec, Formulation formulation) {
  if (!std::holds_alternative<Ellipse>(spec.boundary)) {
    throw Error(ErrorKind::InvalidSpec, "elliptical billiard needs an elliptical boundary");
  }
  return make_billiard(spec, formulation);
}

FreeParticleState free_particle_closed_form(double gamma, const Vec& q0, const Vec& v0,
                                            double z0, double t, double mass) {
  const double t0 = 0.5 * mass * v0.squaredNorm();
  FreeParticleState out;
  if (gamma == 0.0) {
    out.position = q0 + v0 * t;
    out.velocity = v0;
    out.z = z0 + t0 * t;
    return out;
  }
  const double decay = std::exp(-gamma * t);
  // (1 - e^{-gamma t}) / gamma without cancellation.
  const double travel = -std::expm1(-gamma * t) / gamma;
  out.position = q0 + v0 * travel;
  out.velocity = v0 * decay;
  // (E0/g) e^{-gt} - (T0/g) e^{-2gt} = z0 e^{-gt} + T0 e^{-gt} (1 - e^{-gt}) / g
  out.z = z0 * decay + t0 * decay * travel;
  return out;
}

PlanarVelocity circular_impact_closed_form(double x, double y, double vx, double vy) {
  const double r2 = x * x + y * y;
  if (std::abs(r2 - 1.0) > kBoundaryTol) {
    throw Error(ErrorKind::OffBoundary, "point is not on the unit circle");
  }
  return {(-vx * x * x + vx * y * y - 2.0 * vy * x * y) / r2,
          (-2.0 * vx * x * y + vy * x * x - vy * y * y) / r2};
}

PlanarVelocity elliptical_impact_closed_form(double a, double b, double x, double y, double vx,
                                             double vy) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::InvalidSpec, "semiaxes must be positive");
  const double g = (x / a) * (x / a) + (y / b) * (y / b);
  if (std::abs(g - 1.0) > kBoundaryTol) {
    throw Error(ErrorKind::OffBoundary, "point is not on the ellipse");
  }
  const double a2 = a * a, b2 = b * b;
  const double a4 = a2 * a2, b4 = b2 * b2;
  const double den = a4 * y * y + b4 * x * x;
  return {(a4 * vx * y * y - 2.0 * a2 * b2 * vy * x * y - b4 * vx * x * x) / den,
          (-a4 * vy * y * y - 2.0 * a2 * b2 * vx * x * y + b4 * vy * x * x) / den};
}

double angular_quantity(const ContactStateL& s) {
  require_planar(s.q, "q");
  require_planar(s.qdot, "qdot");
  return s.q[0] * s.qdot[1] - s.q[1] * s.qdot[0];
}

PolarRates polar_rates(const Vec& q, const Vec& qdot) {
  require_planar(q, "q");
  require_planar(qdot, "qdot");
  const double r2 = q.squaredNorm();
  if (!(r2 > 0.0)) throw Error(ErrorKind::InvalidSpec, "polar rates undefined at the origin");
  const double r = std::sqrt(r2);
  return {(q[0] * qdot[0] + q[1] * qdot[1]) / r, (q[0] * qdot[1] - q[1] * qdot[0]) / r2};
}

}  // namespace herglotz
