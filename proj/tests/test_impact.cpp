#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace herglotz;
using test::vec2;

namespace {

SwitchingSurface unit_circle() {
  return billiard_surface({Circle{1.0}, 0.0, 1.0});
}

// Non-quadratic kinetic energy, L = 1/2 |v|^2 + c/4 |v|^4 - gamma z.
SystemSpec quartic(double c, double gamma) {
  return make_lagrangian_system(
      2,
      [c, gamma](const Vec&, const Vec& v, double z) {
        const double s = v.squaredNorm();
        return 0.5 * s + 0.25 * c * s * s - gamma * z;
      },
      [c, gamma](const Vec&, const Vec& v, double z) {
        const double s = v.squaredNorm();
        LagrangianPartials p;
        p.value = 0.5 * s + 0.25 * c * s * s - gamma * z;
        p.d_q = Vec::Zero(2);
        p.d_qdot = (1.0 + c * s) * v;
        p.d_z = -gamma;
        p.hess_qdot = (1.0 + c * s) * Mat::Identity(2, 2) + 2.0 * c * v * v.transpose();
        p.mixed_q = Mat::Zero(2, 2);
        p.mixed_z = Vec::Zero(2);
        return p;
      });
}

NaturalForm anisotropic(double gamma) {
  NaturalForm f;
  f.mass = [](const Vec& q) {
    Mat m(2, 2);
    m << 2.0 + q[1] * q[1], 0.4, 0.4, 1.0 + 0.5 * q[0] * q[0];
    return m;
  };
  f.gamma = gamma;
  return f;
}

Vec on_circle(double th) { return vec2(std::cos(th), std::sin(th)); }

// Inward-pointing velocity at a unit-circle point with a bounded-away normal part.
Vec incoming(test::Gen& g, const Vec& q) {
  const Vec t = vec2(-q[1], q[0]);
  return g.uniform(0.1, 2.0) * q + g.uniform(-2.0, 2.0) * t;
}

// Residuals recomputed here: tangential momentum with the explicit planar
// tangent (-ny, nx), and energy.
struct Check {
  double tangential;
  double energy;
};

Check residuals(const SystemSpec& sys, const SwitchingSurface& s, const ContactStateL& a, const ContactStateL& b) {
  const Vec n = s.grad_h(a.q);
  const Vec tangent = vec2(-n[1], n[0]).normalized();
  const Vec pa = evaluate_partials(sys, a).d_qdot;
  const Vec pb = evaluate_partials(sys, b).d_qdot;
  return {std::abs(tangent.dot(pb - pa)) / std::max(1.0, test::max_abs(pa)),
          std::abs(lagrangian_energy(sys, b) - lagrangian_energy(sys, a)) /
              std::max(1.0, std::abs(lagrangian_energy(sys, a)))};
}

}  // namespace

TEST_CASE("natural resolver on the unit circle") {
  const SystemSpec sys = test::billiard_lagrangian(0.0);
  const ImpactResultL r = resolve_impact_natural(sys, {vec2(1, 0), vec2(1, 0.5), 0.0, 0.0}, unit_circle());
  CHECK(r.lambda == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(test::max_abs(r.state_plus.qdot - vec2(-1, 0.5)) < 1e-15);

  const ImpactResultL top = resolve_impact_natural(sys, {vec2(0, 1), vec2(1, 1), 0.0, 0.0}, unit_circle());
  CHECK(test::max_abs(top.state_plus.qdot - vec2(1, -1)) < 1e-15);
}

TEST_CASE("natural resolver at an ellipse vertex") {
  const double a = 0.9, b = 1.1;
  const SwitchingSurface s = billiard_surface({Ellipse{a, b}, 1e-4, 1.0});
  const SystemSpec sys = test::billiard_lagrangian(1e-4);
  const ImpactResultL r = resolve_impact_natural(sys, {vec2(a, 0), vec2(0.7, -0.3), 0.2, 0.0}, s);
  CHECK(test::max_abs(r.state_plus.qdot - vec2(-0.7, -0.3)) < 1e-15);
  const ImpactResultL c = resolve_impact_natural(sys, {vec2(0, -b), vec2(0.7, -0.3), 0.2, 0.0}, s);
  CHECK(test::max_abs(c.state_plus.qdot - vec2(0.7, 0.3)) < 1e-15);
}

TEST_CASE("newton resolver agrees with the natural one") {
  test::Gen g(100);
  const std::vector<SystemSpec> systems{test::billiard_lagrangian(0.0), test::billiard_lagrangian(0.3, 2.0),
                                        make_natural_system(2, anisotropic(0.1))};
  double worst = 0.0;
  for (const SystemSpec& sys : systems) {
    for (int k = 0; k < 100; ++k) {
      const Vec q = on_circle(g.angle());
      const ContactStateL s{q, incoming(g, q), g.uniform(-1, 1), 0.0};
      const ImpactResultL nat = resolve_impact_natural(sys, s, unit_circle());
      const ImpactResultL newt = resolve_impact_newton(sys, s, unit_circle());
      worst = std::max(worst, test::max_abs(nat.state_plus.qdot - newt.state_plus.qdot) /
                                  std::max(1.0, test::max_abs(s.qdot)));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("impact is independent of z") {
  const SystemSpec sys = test::billiard_lagrangian(0.5);
  const Vec q = on_circle(0.7);
  const Vec v = vec2(0.9, 0.2);
  const Vec base = resolve_impact_newton(sys, {q, v, 0.0, 0.0}, unit_circle()).state_plus.qdot;
  for (double z : {-3.0, 1.0, 40.0}) {
    CHECK(test::max_abs(resolve_impact_newton(sys, {q, v, z, 0.0}, unit_circle()).state_plus.qdot - base) < 1e-14);
    CHECK(resolve_impact_natural(sys, {q, v, z, 0.0}, unit_circle()).state_plus.qdot ==
          resolve_impact_natural(sys, {q, v, 0.0, 0.0}, unit_circle()).state_plus.qdot);
  }
}

TEST_CASE("newton resolver on a non-quadratic lagrangian") {
  test::Gen g(4);
  const SystemSpec sys = quartic(0.4, 0.1);
  for (int k = 0; k < 50; ++k) {
    const Vec q = on_circle(g.angle());
    const ContactStateL s{q, incoming(g, q), 0.3, 1.0};
    const ImpactResultL r = resolve_impact_newton(sys, s, unit_circle());
    const Check c = residuals(sys, unit_circle(), s, r.state_plus);
    CHECK(c.tangential <= 1e-10);
    CHECK(c.energy <= 1e-10);
    const Vec n = unit_circle().grad_h(q);
    CHECK(n.dot(s.qdot) * n.dot(r.state_plus.qdot) < 0.0);
  }
}

TEST_CASE("impact invariants on random boundary states") {
  test::Gen g(55);
  const SystemSpec sys = make_natural_system(2, anisotropic(0.2));
  for (int k = 0; k < 200; ++k) {
    const Vec q = on_circle(g.angle());
    const ContactStateL s{q, incoming(g, q), g.uniform(-1, 1), g.uniform(0, 5)};
    for (bool newton : {false, true}) {
      const ImpactResultL r = newton ? resolve_impact_newton(sys, s, unit_circle())
                                     : resolve_impact_natural(sys, s, unit_circle());
      const Check c = residuals(sys, unit_circle(), s, r.state_plus);
      CHECK(c.tangential <= 1e-10);
      CHECK(c.energy <= 1e-10);
      CHECK(r.residuals.tangential <= 1e-10);
      CHECK(r.residuals.energy <= 1e-10);
      CHECK(r.state_plus.q == s.q);
      CHECK(r.state_plus.z == s.z);
      CHECK(r.state_plus.t == s.t);
      const Vec n = unit_circle().grad_h(q);
      CHECK(n.dot(s.qdot) * n.dot(r.state_plus.qdot) < 0.0);

      // Involution.
      const ImpactResultL back = newton ? resolve_impact_newton(sys, r.state_plus, unit_circle())
                                        : resolve_impact_natural(sys, r.state_plus, unit_circle());
      CHECK(test::max_abs(back.state_plus.qdot - s.qdot) <= 1e-12 * std::max(1.0, test::max_abs(s.qdot)));
    }
  }
}

TEST_CASE("hamiltonian resolver") {
  const HamiltonianSpec ham = test::billiard_hamiltonian(0.0);
  const ImpactResultH r = resolve_impact_hamiltonian(ham, unit_circle(), {vec2(1, 0), vec2(1, 0.5), 0.0, 0.0});
  CHECK(test::max_abs(r.state_plus.p - vec2(-1, 0.5)) < 1e-14);
  // lambda = -2 (grad h . p) / |grad h|^2 = -2 (-2) / 4.
  CHECK(r.lambda == doctest::Approx(1.0).epsilon(1e-13));

  // Conjugacy with the Lagrangian resolver through the Legendre map.
  test::Gen g(12);
  const NaturalForm form = anisotropic(0.1);
  const SystemSpec lag = make_natural_system(2, form);
  const HamiltonianSpec h = make_natural_hamiltonian(2, form);
  for (int k = 0; k < 100; ++k) {
    const Vec q = on_circle(g.angle());
    const ContactStateL s{q, incoming(g, q), g.uniform(-1, 1), 0.0};
    const ContactStateH via_lag = legendre_forward(lag, resolve_impact_natural(lag, s, unit_circle()).state_plus);
    const ImpactResultH direct = resolve_impact_hamiltonian(h, unit_circle(), legendre_forward(lag, s));
    CHECK(test::max_abs(direct.state_plus.p - via_lag.p) <= 1e-12 * std::max(1.0, test::max_abs(via_lag.p)));
    CHECK(std::abs(hamiltonian_value(h, direct.state_plus) - hamiltonian_value(h, legendre_forward(lag, s))) <=
          1e-10);
  }
}

TEST_CASE("grazing contacts are reported") {
  const SystemSpec sys = test::billiard_lagrangian(0.1);
  const ContactStateL tangential{vec2(1, 0), vec2(0, 1), 0.0, 0.0};
  auto expect_grazing = [](auto&& fn) {
    try {
      fn();
      FAIL("expected GrazingContact");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::GrazingContact);
    }
  };
  expect_grazing([&] { resolve_impact_natural(sys, tangential, unit_circle()); });
  expect_grazing([&] { resolve_impact_newton(sys, tangential, unit_circle()); });
  expect_grazing([&] {
    resolve_impact_hamiltonian(test::billiard_hamiltonian(0.1), unit_circle(), {vec2(1, 0), vec2(0, 1), 0.0, 0.0});
  });
  // Just above the threshold resolves.
  const ContactStateL almost{vec2(1, 0), vec2(1e-9, 1), 0.0, 0.0};
  CHECK_NOTHROW(resolve_impact_natural(sys, almost, unit_circle()));
}

TEST_CASE("impact input validation") {
  const SystemSpec sys = test::billiard_lagrangian(0.1);
  try {
    resolve_impact_natural(sys, {vec2(0.5, 0), vec2(1, 0), 0.0, 0.0}, unit_circle());
    FAIL("expected OffBoundary");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OffBoundary);
  }
  const SwitchingSurface flat{[](const Vec&) { return 0.0; }, [](const Vec&) { return Vec(Vec::Zero(2)); }};
  try {
    resolve_impact_newton(sys, {vec2(0.5, 0), vec2(1, 0), 0.0, 0.0}, flat);
    FAIL("expected DegenerateNormal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateNormal);
  }

  // E_L = v^3 / 3 is monotone in v, so only the identity root exists.
  const SystemSpec cubic = make_lagrangian_system(1, [](const Vec&, const Vec& v, double) {
    return v[0] * v[0] * v[0] / 6.0;
  });
  const SwitchingSurface wall{[](const Vec& q) { return 1.0 - q[0]; },
                              [](const Vec&) { return Vec(Vec::Constant(1, -1.0)); }};
  try {
    resolve_impact_newton(cubic, {Vec::Constant(1, 1.0), Vec::Constant(1, 1.0), 0.0, 0.0}, wall);
    FAIL("expected the identity root to be rejected");
  } catch (const Error& e) {
    CHECK((e.kind() == ErrorKind::ConvergedToIdentity || e.kind() == ErrorKind::NoConvergence ||
           e.kind() == ErrorKind::SingularHessian));
  }
}

TEST_CASE("one-dimensional impacts") {
  const SystemSpec sys = make_natural_system(1, [] {
    NaturalForm f;
    f.mass = [](const Vec&) { return Mat::Constant(1, 1, 3.0); };
    f.gamma = 0.2;
    return f;
  }());
  const SwitchingSurface wall{[](const Vec& q) { return 1.0 - q[0]; },
                              [](const Vec&) { return Vec(Vec::Constant(1, -1.0)); }};
  const ContactStateL s{Vec::Constant(1, 1.0), Vec::Constant(1, 0.8), 0.1, 0.0};
  CHECK(resolve_impact_natural(sys, s, wall).state_plus.qdot[0] == doctest::Approx(-0.8).epsilon(1e-15));
  CHECK(resolve_impact_newton(sys, s, wall).state_plus.qdot[0] == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(tangent_basis(Vec::Constant(1, -1.0)).cols() == 0);
}

TEST_CASE("householder tangent basis") {
  test::Gen g(1);
  for (int n : {2, 3, 5}) {
    for (int k = 0; k < 20; ++k) {
      const Vec normal = g.vec(n, -1, 1);
      const Mat t = tangent_basis(normal);
      REQUIRE(t.rows() == n);
      REQUIRE(t.cols() == n - 1);
      CHECK(((t.transpose() * t) - Mat::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((t.transpose() * normal).cwiseAbs().maxCoeff() < 1e-14 * normal.norm());
    }
  }
}
