#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace herglotz;
using test::vec2;

namespace {

ContactStateL state(double x, double y, double vx, double vy, double z = 0.0) {
  return {vec2(x, y), vec2(vx, vy), z, 0.0};
}

// z(t) - z0 = int_0^t L ds along the closed-form velocity, by composite
// Simpson with many panels. Independent of the closed-form z expression.
double z_by_quadrature(double gamma, double speed2, double z0, double t) {
  // zdot = T(s) - gamma z is linear; integrate with the integrating factor:
  // z(t) = e^{-gamma t} (z0 + int_0^t e^{gamma s} T0 e^{-2 gamma s} ds).
  const int panels = 2000;
  const double t0 = 0.5 * speed2;
  auto f = [&](double s) { return std::exp(gamma * s) * t0 * std::exp(-2.0 * gamma * s); };
  double acc = f(0.0) + f(t);
  const double h = t / panels;
  for (int k = 1; k < panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(k * h);
  return std::exp(-gamma * t) * (z0 + acc * h / 3.0);
}

}  // namespace

TEST_CASE("circular billiard construction") {
  const HybridSystem hs = make_circular_billiard({Circle{1.0}, 1e-4, 1.0});
  CHECK(hs.n == 2);
  CHECK(hs.resolver == ResolverKind::Natural);
  REQUIRE(hs.lagrangian);
  const HerglotzRate r = herglotz_rhs(*hs.lagrangian, state(0.2, 0.1, 0.7, -0.4));
  CHECK(r.qddot[0] == doctest::Approx(-1e-4 * 0.7).epsilon(1e-15));
  CHECK(r.qddot[1] == doctest::Approx(-1e-4 * -0.4).epsilon(1e-15));

  CHECK(hs.surface.h(vec2(1, 0)) == 0.0);
  CHECK(hs.surface.grad_h(vec2(1, 0)) == vec2(-2, 0));

  const HybridSystem big = make_circular_billiard({Circle{2.0}, 0.0, 1.0});
  CHECK(big.surface.h(vec2(0, 2)) == 0.0);
  CHECK(big.surface.h(vec2(0, 0)) == 4.0);

  const HybridSystem ham = make_circular_billiard({Circle{1.0}, 1e-4, 1.0}, Formulation::Hamiltonian);
  CHECK(ham.resolver == ResolverKind::Hamiltonian);
  CHECK(ham.hamiltonian);
}

TEST_CASE("billiard spec validation") {
  CHECK_THROWS_AS(make_circular_billiard({Circle{0.0}, 0.0, 1.0}), Error);
  CHECK_THROWS_AS(make_elliptical_billiard({Ellipse{1.0, -1.0}, 0.0, 1.0}), Error);
  CHECK_THROWS_AS(make_billiard({Circle{1.0}, 0.0, 0.0}), Error);
  CHECK_THROWS_AS(make_billiard({Circle{1.0}, -0.1, 1.0}), Error);
  try {
    BilliardSpec{Ellipse{0.0, 1.0}, 0.0, 1.0}.validate();
    FAIL("expected InvalidSpec");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSpec);
  }
}

TEST_CASE("conservative billiard keeps its energy") {
  const HybridSystem hs = make_circular_billiard({Circle{1.0}, 0.0, 1.0});
  const HybridTrajectory tr = simulate(hs, state(0.5, 0, 1, 1), 20.0);
  CHECK(tr.status == TerminalStatus::Completed);
  CHECK(tr.events.size() >= 10);
  for (const SampleRow& r : sample_uniform(tr, 500)) {
    CHECK(std::abs(state_energy(hs, r.t, r.y) - 1.0) < 1e-9);
  }
}

TEST_CASE("a degenerate ellipse is the circle") {
  const HybridTrajectory c = simulate(make_circular_billiard({Circle{1.0}, 1e-4, 1.0}), state(0.5, 0, 1, 1), 10.0);
  const HybridTrajectory e = simulate(make_elliptical_billiard({Ellipse{1.0, 1.0}, 1e-4, 1.0}), state(0.5, 0, 1, 1), 10.0);
  REQUIRE(c.events.size() == e.events.size());
  std::vector<double> times;
  for (int k = 0; k <= 200; ++k) times.push_back(10.0 * k / 200.0);
  const auto a = sample(c, times);
  const auto b = sample(e, times);
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, test::max_abs(a[k].y - b[k].y));
  CHECK(worst < 1e-12);
}

TEST_CASE("the fig2 elliptical run completes") {
  const HybridSystem hs = make_elliptical_billiard({Ellipse{0.9, 1.1}, 1e-4, 1.0});
  const HybridTrajectory tr = simulate(hs, state(0.5, 0, 1, 1.2), 20.0);
  CHECK(tr.status == TerminalStatus::Completed);
  CHECK(tr.t_end == 20.0);
  CHECK(tr.events.size() >= 10);
  for (const ImpactEvent& e : tr.events) {
    CHECK(e.residuals.tangential <= 1e-10);
    CHECK(e.residuals.energy <= 1e-10);
  }
}

TEST_CASE("damped free particle closed form") {
  const double gamma = 1e-4;
  const FreeParticleState s = free_particle_closed_form(gamma, vec2(0.5, 0), vec2(1, 1), 0.0, 1.0);
  CHECK(std::abs(s.position[0] - 1.4999500016667) < 1e-12);
  CHECK(std::abs(s.velocity[0] - std::exp(-gamma)) < 1e-15);

  const FreeParticleState zero = free_particle_closed_form(gamma, vec2(0.5, 0.2), vec2(1, -1), 0.3, 0.0);
  CHECK(zero.position == vec2(0.5, 0.2));
  CHECK(zero.velocity == vec2(1, -1));
  CHECK(zero.z == 0.3);

  // gamma -> 0 limit.
  for (double t : {0.5, 3.0, 20.0}) {
    const FreeParticleState lim = free_particle_closed_form(0.0, vec2(0.5, 0), vec2(1, 1), 0.2, t);
    const FreeParticleState tiny = free_particle_closed_form(1e-12, vec2(0.5, 0), vec2(1, 1), 0.2, t);
    CHECK(test::max_abs(lim.position - tiny.position) < 1e-6);
    CHECK(test::max_abs(lim.velocity - tiny.velocity) < 1e-6);
    CHECK(std::abs(lim.z - tiny.z) < 1e-6);
    CHECK(test::max_abs(lim.position - (vec2(0.5, 0) + t * vec2(1, 1))) < 1e-15);
    CHECK(lim.z == doctest::Approx(0.2 + t));
  }
}

TEST_CASE("corrected action formula against quadrature") {
  for (double gamma : {1e-4, 0.05, 0.7}) {
    for (double z0 : {0.0, 0.4}) {
      for (double t : {0.3, 2.0, 5.0}) {
        const Vec v0 = vec2(1.0, 1.2);
        const FreeParticleState s = free_particle_closed_form(gamma, vec2(0.1, 0), v0, z0, t);
        CAPTURE(gamma);
        CAPTURE(t);
        CHECK(std::abs(s.z - z_by_quadrature(gamma, v0.squaredNorm(), z0, t)) < 1e-10);

        // Explicit form (E0/gamma) e^{-gamma t} - (T0/gamma) e^{-2 gamma t}.
        const double t0 = 0.5 * v0.squaredNorm();
        const double e0 = t0 + gamma * z0;
        const double explicit_z = (e0 / gamma) * std::exp(-gamma * t) - (t0 / gamma) * std::exp(-2 * gamma * t);
        // The explicit form cancels catastrophically for small gamma.
        CHECK(std::abs(s.z - explicit_z) < 1e-13 + 1e-14 / gamma);
      }
    }
  }
}

TEST_CASE("mass enters the free flight through T0") {
  const FreeParticleState s = free_particle_closed_form(0.2, vec2(0, 0), vec2(1, 0), 0.0, 1.5, 3.0);
  CHECK(std::abs(s.z - z_by_quadrature(0.2, 3.0, 0.0, 1.5)) < 1e-10);
}

TEST_CASE("circular reflection formula") {
  const PlanarVelocity a = circular_impact_closed_form(1, 0, 1, 0.5);
  CHECK(a.vx == doctest::Approx(-1.0));
  CHECK(a.vy == doctest::Approx(0.5));
  const PlanarVelocity b = circular_impact_closed_form(0, 1, 1, 1);
  CHECK(b.vx == doctest::Approx(1.0));
  CHECK(b.vy == doctest::Approx(-1.0));
  try {
    circular_impact_closed_form(0.9, 0, 1, 0);
    FAIL("expected OffBoundary");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OffBoundary);
  }
}

TEST_CASE("elliptical reflection formula") {
  const double a = 0.9, b = 1.1;
  const PlanarVelocity v = elliptical_impact_closed_form(a, b, a, 0, 0.6, -0.8);
  CHECK(v.vx == doctest::Approx(-0.6));
  CHECK(v.vy == doctest::Approx(-0.8));
  const PlanarVelocity w = elliptical_impact_closed_form(a, b, 0, b, 0.6, -0.8);
  CHECK(w.vx == doctest::Approx(0.6));
  CHECK(w.vy == doctest::Approx(0.8));

  test::Gen g(6);
  for (int k = 0; k < 100; ++k) {
    const double th = g.angle();
    const double x = std::cos(th), y = std::sin(th);
    const double vx = g.uniform(-2, 2), vy = g.uniform(-2, 2);
    const PlanarVelocity e = elliptical_impact_closed_form(1, 1, x, y, vx, vy);
    const PlanarVelocity c = circular_impact_closed_form(x, y, vx, vy);
    CHECK(std::abs(e.vx - c.vx) < 1e-14);
    CHECK(std::abs(e.vy - c.vy) < 1e-14);
  }
  CHECK_THROWS_AS(elliptical_impact_closed_form(a, b, 0.5, 0.5, 1, 0), Error);
}

TEST_CASE("closed-form maps match the natural resolver") {
  test::Gen g(1000);
  const SystemSpec sys = test::billiard_lagrangian(1e-4);
  const SwitchingSurface circle = billiard_surface({Circle{1.0}, 1e-4, 1.0});
  const double a = 0.9, b = 1.1;
  const SwitchingSurface ellipse = billiard_surface({Ellipse{a, b}, 1e-4, 1.0});
  double worst_c = 0.0, worst_e = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double th = g.angle();
    const Vec qc = vec2(std::cos(th), std::sin(th));
    const Vec v = vec2(g.uniform(-2, 2), g.uniform(-2, 2));
    if (std::abs(circle.grad_h(qc).dot(v)) > 1e-6) {
      const PlanarVelocity c = circular_impact_closed_form(qc[0], qc[1], v[0], v[1]);
      const Vec r = resolve_impact_natural(sys, {qc, v, 0.0, 0.0}, circle).state_plus.qdot;
      worst_c = std::max(worst_c, test::max_abs(r - vec2(c.vx, c.vy)));
    }
    const Vec qe = vec2(a * std::cos(th), b * std::sin(th));
    if (std::abs(ellipse.grad_h(qe).dot(v)) > 1e-6) {
      const PlanarVelocity e = elliptical_impact_closed_form(a, b, qe[0], qe[1], v[0], v[1]);
      const Vec r = resolve_impact_natural(sys, {qe, v, 0.0, 0.0}, ellipse, ImpactConfig{1e-9}).state_plus.qdot;
      worst_e = std::max(worst_e, test::max_abs(r - vec2(e.vx, e.vy)));
    }
  }
  CHECK(worst_c < 1e-12);
  CHECK(worst_e < 1e-12);
}

TEST_CASE("angular quantity") {
  CHECK(angular_quantity(state(0.5, 0, 1, 1)) == 0.5);
  CHECK(angular_quantity(state(0.3, 0.4, 0.6, 0.8)) == doctest::Approx(0.0));

  const PolarRates p = polar_rates(vec2(0.5, 0), vec2(1, 1));
  CHECK(p.r_dot == doctest::Approx(1.0));
  CHECK(p.theta_dot == doctest::Approx(2.0));
}

TEST_CASE("angular quantity decays through impacts") {
  const double gamma = 1e-4;
  const HybridSystem hs = make_circular_billiard({Circle{1.0}, gamma, 1.0});
  const HybridTrajectory tr = simulate(hs, state(0.5, 0, 1, 1), 20.0);
  REQUIRE(tr.events.size() >= 10);
  double worst = 0.0;
  for (const SampleRow& r : sample_uniform(tr, 1000)) {
    const double ell = angular_quantity(unpack_lagrangian(2, r.t, r.y));
    worst = std::max(worst, std::abs(ell - 0.5 * std::exp(-gamma * r.t)));
  }
  CHECK(worst < 1e-8);

  for (const ImpactEvent& e : tr.events) {
    const PolarRates before = polar_rates(e.q, e.v_minus(2));
    const PolarRates after = polar_rates(e.q, e.v_plus(2));
    CHECK(std::abs(after.r_dot + before.r_dot) < 1e-10);
    CHECK(std::abs(after.theta_dot - before.theta_dot) < 1e-10);
  }
}
