#pragma once

#include <cmath>
#include <random>

#include "herglotz/systems.hpp"

namespace test {

using herglotz::Vec;

inline Vec vec2(double x, double y) { return Eigen::Vector2d(x, y); }

inline double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline herglotz::SystemSpec billiard_lagrangian(double gamma, double mass = 1.0) {
  herglotz::BilliardSpec spec;
  spec.gamma = gamma;
  spec.mass = mass;
  return herglotz::make_natural_system(2, herglotz::billiard_natural_form(spec));
}

inline herglotz::HamiltonianSpec billiard_hamiltonian(double gamma, double mass = 1.0) {
  herglotz::BilliardSpec spec;
  spec.gamma = gamma;
  spec.mass = mass;
  return herglotz::make_natural_hamiltonian(2, herglotz::billiard_natural_form(spec));
}

// Deterministic generator for property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(unsigned long long seed) : rng(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  Vec vec(int n, double lo, double hi) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  double angle() { return uniform(0.0, 2.0 * 3.14159265358979323846); }
};

}  // namespace test
