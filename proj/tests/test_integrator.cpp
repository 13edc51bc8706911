#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace herglotz;
using test::vec2;

namespace {

// Packed damped free particle [x, y, vx, vy, z] with the closed-form field
// written out by hand: xddot = -gamma xdot, zdot = |v|^2 / 2 - gamma z.
VectorField damped_particle(double gamma) {
  return [gamma](double, const Vec& y) {
    Vec d(5);
    d << y[2], y[3], -gamma * y[2], -gamma * y[3], 0.5 * (y[2] * y[2] + y[3] * y[3]) - gamma * y[4];
    return d;
  };
}

Vec packed(double x, double y, double vx, double vy, double z) {
  Vec s(5);
  s << x, y, vx, vy, z;
  return s;
}

struct Closed {
  double x, y, vx, vy, z;
};

// Independent evaluation of the damped free flight, with plain exp().
Closed closed(double gamma, double x0, double y0, double vx0, double vy0, double z0, double t) {
  const double decay = std::exp(-gamma * t);
  const double t0 = 0.5 * (vx0 * vx0 + vy0 * vy0);
  const double e0 = t0 + gamma * z0;
  return {x0 + vx0 * (1 - decay) / gamma, y0 + vy0 * (1 - decay) / gamma, vx0 * decay,
          vy0 * decay, (e0 / gamma) * decay - (t0 / gamma) * decay * decay};
}

SwitchingSurface unit_circle() {
  return {[](const Vec& q) { return 1.0 - q.squaredNorm(); },
          [](const Vec& q) { return Vec(-2.0 * q); }};
}

Vec eval_flow(const FlowSegment& f, double t) {
  for (const DenseSegment& p : f.pieces) {
    if (t <= p.t_end()) return p.evaluate(t);
  }
  return f.y_end;
}

}  // namespace

TEST_CASE("scalar exponential decay") {
  const VectorField rhs = [](double, const Vec& y) { return Vec(-y); };
  StepperConfig cfg;
  double t = 0.0;
  Vec y = Vec::Constant(1, 1.0);
  double h = cfg.h_init;
  while (t < 1.0) {
    const StepResult r = step(rhs, t, y, h, cfg, 1.0);
    t += r.h_accepted;
    y = r.y;
    h = r.h_next;
  }
  CHECK(t == 1.0);
  CHECK(std::abs(y[0] - std::exp(-1.0)) < 1e-9);

  const FlowSegment f = integrate(rhs, 0.0, Vec::Constant(1, 1.0), 1.0, cfg);
  CHECK(std::abs(f.y_end[0] - std::exp(-1.0)) < 1e-9);
  CHECK(f.t_end == 1.0);
}

TEST_CASE("damped free particle against the closed form") {
  const double gamma = 1e-4;
  const StepperConfig cfg;
  const FlowSegment f = integrate(damped_particle(gamma), 0.0, packed(0.5, 0, 1, 1, 0), 5.0, cfg);

  const double x1 = 0.5 + (1.0 / gamma) * (1.0 - std::exp(-gamma));
  CHECK(std::abs(x1 - 1.4999500016667) < 1e-12);
  CHECK(std::abs(eval_flow(f, 1.0)[0] - x1) < 1e-9);

  double worst = 0.0;
  double worst_z = 0.0;
  for (int k = 0; k <= 500; ++k) {
    const double t = 5.0 * k / 500.0;
    const Vec y = eval_flow(f, t);
    const Closed c = closed(gamma, 0.5, 0, 1, 1, 0, t);
    worst = std::max({worst, std::abs(y[0] - c.x), std::abs(y[1] - c.y), std::abs(y[2] - c.vx),
                      std::abs(y[3] - c.vy)});
    worst_z = std::max(worst_z, std::abs(y[4] - c.z));
  }
  CHECK(worst < 1e-8);
  CHECK(worst_z < 1e-8);
}

TEST_CASE("tighter tolerances never increase the error") {
  const double gamma = 0.3;
  const Closed c = closed(gamma, 0.1, 0.2, 1.3, -0.7, 0.4, 4.0);
  double previous = std::numeric_limits<double>::infinity();
  for (double tol = 1e-5; tol >= 1e-11; tol *= 0.5) {
    StepperConfig cfg;
    cfg.rtol = cfg.atol = tol;
    const FlowSegment f = integrate(damped_particle(gamma), 0.0, packed(0.1, 0.2, 1.3, -0.7, 0.4), 4.0, cfg);
    const double err = std::max({std::abs(f.y_end[0] - c.x), std::abs(f.y_end[1] - c.y),
                                 std::abs(f.y_end[2] - c.vx), std::abs(f.y_end[3] - c.vy),
                                 std::abs(f.y_end[4] - c.z)});
    CAPTURE(tol);
    // Below 1e-13 the comparison is at the rounding floor of the oracle.
    CHECK(err <= std::max(previous, 1e-13));
    previous = err;
  }
}

TEST_CASE("dense output reproduces step endpoints") {
  test::Gen g(8);
  const VectorField rhs = damped_particle(0.5);
  StepperConfig cfg;
  for (int k = 0; k < 50; ++k) {
    const Vec y0 = g.vec(5, -1, 1);
    const StepResult r = step(rhs, 0.3, y0, g.uniform(0.01, 0.2), cfg);
    const DenseSegment& s = r.segment;
    CHECK(test::max_abs(s.evaluate(s.t_start()) - y0) <= 1e-13 * std::max(1.0, test::max_abs(y0)));
    CHECK(test::max_abs(s.evaluate(s.t_end()) - r.y) <= 1e-13 * std::max(1.0, test::max_abs(r.y)));
    CHECK(s.t_end() - s.t_start() == doctest::Approx(r.h_accepted));
  }
}

TEST_CASE("fixed step is fifth order") {
  const VectorField rhs = [](double, const Vec& y) { return Vec(-y); };
  const StepperConfig cfg;
  const double e1 = std::abs(fixed_step(rhs, 0, Vec::Constant(1, 1.0), 0.2, cfg).y[0] - std::exp(-0.2));
  const double e2 = std::abs(fixed_step(rhs, 0, Vec::Constant(1, 1.0), 0.1, cfg).y[0] - std::exp(-0.1));
  // Local error O(h^6).
  CHECK(e1 / e2 > 40.0);
}

TEST_CASE("straight-line events on the unit circle") {
  const SwitchingSurface circle = unit_circle();
  const VectorField rhs = damped_particle(0.0);
  const StepperConfig cfg;
  const EventConfig ev;

  FlowResult r = integrate_until_event(rhs, 0.0, packed(0, 0, 1, 0, 0), 10.0, circle, 2, cfg, ev);
  REQUIRE(r.hit);
  CHECK(std::abs(r.hit->t - 1.0) < 1e-10);
  CHECK(test::max_abs(r.hit->y.head(2) - vec2(1, 0)) < 1e-10);
  CHECK(r.hit->normal_velocity < 0.0);

  r = integrate_until_event(rhs, 0.0, packed(0.5, 0, 1, 0, 0), 10.0, circle, 2, cfg, ev);
  REQUIRE(r.hit);
  CHECK(std::abs(r.hit->t - 0.5) < 1e-10);

  // No event before the horizon.
  r = integrate_until_event(rhs, 0.0, packed(0, 0, 1, 0, 0), 0.5, circle, 2, cfg, ev);
  CHECK_FALSE(r.hit);
  CHECK(r.segment.t_end == 0.5);
}

TEST_CASE("damped event time against a scalar root solve") {
  const double gamma = 1e-4;
  const FlowResult r = integrate_until_event(damped_particle(gamma), 0.0, packed(0.5, 0, 1, 1, 0), 10.0,
                                             unit_circle(), 2, StepperConfig{}, EventConfig{});
  REQUIRE(r.hit);

  // Bisection on |q(t)|^2 - 1 along the closed form.
  double lo = 0.0, hi = 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    const Closed c = closed(gamma, 0.5, 0, 1, 1, 0, mid);
    (c.x * c.x + c.y * c.y < 1.0 ? lo : hi) = mid;
  }
  CHECK(std::abs(r.hit->t - 0.5 * (lo + hi)) < 1e-8);
  CHECK(std::abs(unit_circle().h(r.hit->y.head(2))) <= 1e-12);
  // Inward-approach direction: grad h . qdot < 0 with h > 0 inside.
  CHECK(unit_circle().grad_h(r.hit->y.head(2)).dot(r.hit->y.segment(2, 2)) < 0.0);
}

TEST_CASE("event states stay on the surface across many chords") {
  test::Gen g(31);
  const SwitchingSurface circle = unit_circle();
  for (int k = 0; k < 100; ++k) {
    const double r0 = g.uniform(0.0, 0.9);
    const double th = g.angle();
    const double ph = g.angle();
    const double speed = g.uniform(0.5, 3.0);
    const Vec y0 = packed(r0 * std::cos(th), r0 * std::sin(th), speed * std::cos(ph), speed * std::sin(ph), 0);
    const FlowResult r = integrate_until_event(damped_particle(0.01), 0.0, y0, 100.0, circle, 2,
                                               StepperConfig{}, EventConfig{});
    REQUIRE(r.hit);
    CHECK(std::abs(circle.h(r.hit->y.head(2))) <= 1e-12);
    CHECK(r.hit->normal_velocity < 0.0);
  }
}

TEST_CASE("locate_event on a known root") {
  // q(t) = t on [0.9, 1.1] with h = 1 - q^2.
  const VectorField rhs = [](double, const Vec&) { return Vec(Eigen::Vector3d(1, 0, 0)); };
  const StepResult r = fixed_step(rhs, 0.9, Vec(Eigen::Vector3d(0.9, 1, 0)), 0.2, StepperConfig{});
  const SwitchingSurface s{[](const Vec& q) { return 1.0 - q[0] * q[0]; },
                           [](const Vec& q) { return Vec(-2.0 * q); }};
  const EventFunction fn{1, &s, &rhs};
  const EventConfig ev;
  const LocatedEvent e = locate_event(r.segment, fn, ev);
  CHECK(std::abs(e.t - 1.0) <= ev.t_tol);

  // A root of multiplicity three crosses with zero normal velocity.
  const SwitchingSurface cubic{[](const Vec& q) { return std::pow(1.0 - q[0], 3); },
                               [](const Vec& q) { return Vec(Vec::Constant(1, -3.0 * std::pow(1.0 - q[0], 2))); }};
  const EventFunction graze{1, &cubic, &rhs};
  try {
    locate_event(r.segment, graze, ev);
    FAIL("expected GrazingContact");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::GrazingContact);
  }

  // No crossing on [0.9, 0.95].
  try {
    locate_event(r.segment, fn, ev, 0.9, 0.95);
    FAIL("expected NoSignChange");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::NoSignChange);
  }
}

TEST_CASE("integrator errors") {
  StepperConfig bad;
  bad.rtol = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  EventConfig bad_ev;
  bad_ev.t_tol = -1.0;
  CHECK_THROWS_AS(bad_ev.validate(), Error);

  // y' = y^2 blows up at t = 1.
  const VectorField blowup = [](double, const Vec& y) { return Vec(y.cwiseAbs2()); };
  StepperConfig cfg;
  cfg.h_max = 1.0;
  try {
    integrate(blowup, 0.0, Vec::Constant(1, 1.0), 2.0, cfg);
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::StepSizeUnderflow || e.kind() == ErrorKind::NonFinite));
  }

  StepperConfig few;
  few.max_steps = 5;
  try {
    integrate(damped_particle(0.0), 0.0, packed(0, 0, 1, 0, 0), 100.0, few);
    FAIL("expected MaxStepsExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MaxStepsExceeded);
  }

  try {
    integrate_until_event(damped_particle(0.0), 0.0, packed(2, 0, 1, 0, 0), 1.0, unit_circle(), 2,
                          StepperConfig{}, EventConfig{});
    FAIL("expected ExteriorState");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ExteriorState);
  }
}

TEST_CASE("boundary start stays disarmed until back inside") {
  // Leaving (1, 0) inward after a reflection: the next hit is the far side.
  const FlowResult r = integrate_until_event(damped_particle(0.0), 0.0, packed(1, 0, -1, 0, 0), 10.0,
                                             unit_circle(), 2, StepperConfig{}, EventConfig{}, true);
  REQUIRE(r.hit);
  CHECK(std::abs(r.hit->t - 2.0) < 1e-10);
  CHECK(std::abs(r.hit->y[0] + 1.0) < 1e-10);
}
