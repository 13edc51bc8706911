#include "herglotz/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace herglotz {

namespace {

// Integral over [x0, x1] of the quadratic through (ta, fa), (tb, fb), (tc, fc).
double quadratic_integral(double ta, double fa, double tb, double fb, double tc, double fc,
                          double x0, double x1) {
  const double d1 = (fb - fa) / (tb - ta);
  const double d2 = ((fc - fb) / (tc - tb) - d1) / (tc - ta);
  const double delta = tb - ta;
  auto antiderivative = [&](double x) {
    const double s = x - ta;
    return fa * s + 0.5 * d1 * s * s + d2 * (s * s * s / 3.0 - 0.5 * delta * s * s);
  };
  return antiderivative(x1) - antiderivative(x0);
}

bool is_reset(const std::vector<SampleRow>& rows, std::size_t k) {
  return k > 0 && rows[k].flag == SampleFlag::PostImpact &&
         rows[k - 1].flag == SampleFlag::PreImpact;
}

// Orthonormal complement of `normal` by Gram-Schmidt over the standard basis.
Mat gram_schmidt_tangents(const Vec& normal) {
  const Eigen::Index n = normal.size();
  std::vector<Vec> basis{normal.normalized()};
  for (Eigen::Index k = 0; k < n && static_cast<Eigen::Index>(basis.size()) < n; ++k) {
    Vec v = Vec::Unit(n, k);
    for (const Vec& b : basis) v -= v.dot(b) * b;
    for (const Vec& b : basis) v -= v.dot(b) * b;
    const double len = v.norm();
    if (len > 0.25) basis.push_back(v / len);
  }
  Mat out(n, n - 1);
  for (Eigen::Index k = 1; k < n; ++k) out.col(k - 1) = basis[static_cast<std::size_t>(k)];
  return out;
}

}  // namespace

std::vector<double> cumulative_rate_integral(const std::vector<SampleRow>& rows,
                                             const RowEvaluator& rate) {
  std::vector<double> acc(rows.size(), 0.0);
  if (rows.empty()) return acc;
  std::vector<double> r(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) r[k] = rate(rows[k]);

  std::size_t run_start = 0;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    const std::size_t next = k + 1;
    if (is_reset(rows, next)) {
      acc[next] = acc[k];
      run_start = next;
      continue;
    }
    const double ta = rows[k].t;
    const double tb = rows[next].t;
    double piece = 0.0;
    if (tb > ta) {
      // Run end: the last row before a reset or the end of the table.
      const bool has_after = next + 1 < rows.size() && !is_reset(rows, next + 1) &&
                             rows[next + 1].t > tb;
      const bool has_before = k > run_start && rows[k - 1].t < ta;
      if (has_before) {
        piece = quadratic_integral(rows[k - 1].t, r[k - 1], ta, r[k], tb, r[next], ta, tb);
      } else if (has_after) {
        piece = quadratic_integral(ta, r[k], tb, r[next], rows[next + 1].t, r[next + 1], ta, tb);
      } else {
        piece = 0.5 * (r[k] + r[next]) * (tb - ta);
      }
    }
    acc[next] = acc[k] + piece;
  }
  return acc;
}

CheckReport check_dissipated_quantity(const std::vector<SampleRow>& rows, const RowEvaluator& f,
                                      const RowEvaluator& rate, double tol, std::string name) {
  if (rows.empty()) throw Error(ErrorKind::InvalidSpec, "cannot check an empty trajectory");
  CheckReport rep;
  rep.name = std::move(name);
  rep.tolerance = tol;
  const std::vector<double> integral = cumulative_rate_integral(rows, rate);
  const double f0 = f(rows.front());
  const double scale = f0 != 0.0 ? std::abs(f0) : 1.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double ref = f0 * std::exp(integral[k]);
    const double v = f(rows[k]);
    const double viol = std::isfinite(v) ? std::abs(v - ref) / scale
                                         : std::numeric_limits<double>::infinity();
    if (!(viol <= rep.max_violation)) {
      rep.max_violation = viol;
      rep.location = rows[k].t;
      rep.row = static_cast<long>(k);
    }
  }
  rep.passed = rep.max_violation <= tol;
  return rep;
}

CheckReport check_energy_decay(const std::vector<SampleRow>& rows, const HybridSystem& hs,
                               double tol) {
  return check_dissipated_quantity(
      rows, [&](const SampleRow& r) { return state_energy(hs, r.t, r.y); },
      [&](const SampleRow& r) { return dissipation_rate(hs, r.t, r.y); }, tol, "energy_decay");
}

CheckReport check_dissipated_quantity(const std::vector<SampleRow>& rows, const RowEvaluator& f,
                                      const HybridSystem& hs, double tol) {
  return check_dissipated_quantity(
      rows, f, [&](const SampleRow& r) { return dissipation_rate(hs, r.t, r.y); }, tol);
}

CheckReport check_impact_conditions(const ImpactEvent& event, const HybridSystem& hs,
                                    double tol) {
  const int n = hs.n;
  CheckReport rep;
  rep.name = "impact_conditions";
  rep.tolerance = tol;
  rep.location = event.t;
  rep.row = event.index;

  const Vec& ym = event.state_minus;
  const Vec& yp = event.state_plus;
  if (ym.size() != 2 * n + 1 || yp.size() != 2 * n + 1) {
    throw Error(ErrorKind::DimensionMismatch, "event states have the wrong dimension");
  }
  if (ym.head(n) != yp.head(n) || ym[2 * n] != yp[2 * n]) {
    rep.max_violation = std::numeric_limits<double>::infinity();
    rep.passed = false;
    rep.detail = "q or z changed across the impact";
    return rep;
  }

  Vec pm, pp;
  if (hs.formulation == Formulation::Lagrangian) {
    pm = evaluate_partials(*hs.lagrangian, unpack_lagrangian(n, event.t, ym)).d_qdot;
    pp = evaluate_partials(*hs.lagrangian, unpack_lagrangian(n, event.t, yp)).d_qdot;
  } else {
    pm = ym.segment(n, n);
    pp = yp.segment(n, n);
  }
  const double em = state_energy(hs, event.t, ym);
  const double ep = state_energy(hs, event.t, yp);

  double tangential = 0.0;
  if (n > 1) {
    const Mat basis = gram_schmidt_tangents(hs.surface.grad_h(ym.head(n)));
    tangential = (basis.transpose() * (pp - pm)).cwiseAbs().maxCoeff() /
                 std::max(1.0, pm.cwiseAbs().maxCoeff());
  }
  const double energy = std::abs(ep - em) / std::max(1.0, std::abs(em));
  rep.max_violation = std::max(tangential, energy);
  rep.passed = rep.max_violation <= tol;
  std::ostringstream os;
  os.precision(3);
  os << "tangential=" << tangential << " energy=" << energy;
  rep.detail = os.str();
  return rep;
}

CheckReport check_all_impacts(const HybridTrajectory& traj, const HybridSystem& hs, double tol) {
  CheckReport worst;
  worst.name = "impact_conditions";
  worst.tolerance = tol;
  worst.detail = "no impacts";
  bool first = true;
  for (const ImpactEvent& e : traj.events) {
    CheckReport r = check_impact_conditions(e, hs, tol);
    if (first || r.max_violation > worst.max_violation) {
      worst = std::move(r);
      first = false;
    }
  }
  worst.passed = worst.max_violation <= tol;
  return worst;
}

CheckReport check_contact_identities(const HamiltonianSpec& sys,
                                     const std::vector<ContactStateH>& states, double tol) {
  CheckReport rep;
  rep.name = "contact_identity";
  rep.tolerance = tol;
  long row = 0;
  for (const ContactStateH& s : states) {
    const HamiltonRate x = hamiltonian_rhs(sys, s);
    const HamiltonianPartials d = evaluate_partials(sys, s);
    const double speed = std::sqrt(x.qdot.squaredNorm() + x.pdot.squaredNorm() + x.zdot * x.zdot);
    double lhs = 0.0;
    if (speed > 0.0) {
      const double eps = 1e-5 / std::max(1.0, speed);
      auto shifted = [&](double e) {
        ContactStateH out = s;
        out.q += e * x.qdot;
        out.p += e * x.pdot;
        out.z += e * x.zdot;
        return hamiltonian_value(sys, out);
      };
      lhs = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
    }
    const double rhs = -d.d_z * d.value;
    const double viol = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
    if (viol > rep.max_violation) {
      rep.max_violation = viol;
      rep.location = s.t;
      rep.row = row;
    }
    ++row;
  }
  rep.passed = rep.max_violation <= tol;
  return rep;
}

CheckReport check_energy_identity(const SystemSpec& sys, const std::vector<ContactStateL>& states,
                                  double tol) {
  CheckReport rep;
  rep.name = "energy_identity";
  rep.tolerance = tol;
  long row = 0;
  for (const ContactStateL& s : states) {
    const HerglotzRate x = herglotz_rhs(sys, s);
    const LagrangianPartials d = evaluate_partials(sys, s);
    const double energy = s.qdot.dot(d.d_qdot) - d.value;
    const double speed =
        std::sqrt(x.qdot.squaredNorm() + x.qddot.squaredNorm() + x.zdot * x.zdot);
    double lhs = 0.0;
    if (speed > 0.0) {
      const double eps = 1e-5 / std::max(1.0, speed);
      auto shifted = [&](double e) {
        ContactStateL out = s;
        out.q += e * x.qdot;
        out.qdot += e * x.qddot;
        out.z += e * x.zdot;
        return lagrangian_energy(sys, out);
      };
      lhs = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
    }
    const double rhs = d.d_z * energy;
    const double viol = std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
    if (viol > rep.max_violation) {
      rep.max_violation = viol;
      rep.location = s.t;
      rep.row = row;
    }
    ++row;
  }
  rep.passed = rep.max_violation <= tol;
  return rep;
}

}  // namespace herglotz
