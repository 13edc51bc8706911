#include "herglotz/impact.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace herglotz {

namespace {

Vec checked_normal(const SwitchingSurface& surface, const Vec& q, const ImpactConfig& cfg) {
  const double g = surface.h(q);
  if (!std::isfinite(g) || std::abs(g) > cfg.boundary_tol) {
    throw Error(ErrorKind::OffBoundary,
                "impact point is off the surface (|h| = " + std::to_string(std::abs(g)) + ")");
  }
  Vec normal = surface.grad_h(q);
  if (normal.size() != q.size()) {
    throw Error(ErrorKind::DimensionMismatch, "grad h has the wrong length");
  }
  if (!normal.allFinite() || !(normal.squaredNorm() > 0.0)) {
    throw Error(ErrorKind::DegenerateNormal, "grad h vanishes at the impact point");
  }
  return normal;
}

void check_grazing(double vn, const ImpactConfig& cfg) {
  if (std::abs(vn) < cfg.grazing_threshold) {
    throw Error(ErrorKind::GrazingContact,
                "normal velocity " + std::to_string(vn) + " is below the grazing threshold");
  }
}

double tangential_residual(const Mat& basis, const Vec& p_minus, const Vec& p_plus) {
  if (basis.cols() == 0) return 0.0;
  const double scale = std::max(1.0, p_minus.cwiseAbs().maxCoeff());
  return (basis.transpose() * (p_plus - p_minus)).cwiseAbs().maxCoeff() / scale;
}

double energy_residual(double e_minus, double e_plus) {
  return std::abs(e_plus - e_minus) / std::max(1.0, std::abs(e_minus));
}

ImpactResiduals lagrangian_residuals(const SystemSpec& sys, const ContactStateL& minus,
                                     const ContactStateL& plus, const Vec& normal) {
  const LagrangianPartials pm = evaluate_partials(sys, minus);
  const LagrangianPartials pp = evaluate_partials(sys, plus);
  const double em = minus.qdot.dot(pm.d_qdot) - pm.value;
  const double ep = plus.qdot.dot(pp.d_qdot) - pp.value;
  return {tangential_residual(tangent_basis(normal), pm.d_qdot, pp.d_qdot),
          energy_residual(em, ep)};
}

}  // namespace

Mat tangent_basis(const Vec& normal) {
  const Eigen::Index n = normal.size();
  const double norm = normal.norm();
  if (!(norm > 0.0)) throw Error(ErrorKind::DegenerateNormal, "zero normal");
  if (n == 1) return Mat(1, 0);
  Vec u = normal / norm;
  u[0] += u[0] >= 0.0 ? 1.0 : -1.0;
  const Mat reflector = Mat::Identity(n, n) - (2.0 / u.squaredNorm()) * u * u.transpose();
  return reflector.rightCols(n - 1);
}

ImpactResultL resolve_impact_natural(const SystemSpec& sys, const ContactStateL& s_minus,
                                     const SwitchingSurface& surface, const ImpactConfig& cfg) {
  if (!sys.natural) {
    throw Error(ErrorKind::InvalidSpec, "natural resolver requires natural-form data");
  }
  detail::require_dimension(sys.n, s_minus.q, "q");
  detail::require_dimension(sys.n, s_minus.qdot, "qdot");
  const Vec normal = checked_normal(surface, s_minus.q, cfg);
  const double vn = normal.dot(s_minus.qdot);
  check_grazing(vn, cfg);

  const Mat m = sys.natural->mass(s_minus.q);
  Eigen::PartialPivLU<Mat> lu(m);
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || std::pow(std::abs(lu.determinant()), 1.0 / sys.n) <=
                            kRegularityTolerance * scale) {
    throw Error(ErrorKind::SingularMassMatrix, "mass matrix is singular at the impact point");
  }
  const Vec minv_n = lu.solve(normal);
  const double denom = normal.dot(minv_n);

  ImpactResultL out;
  out.lambda = -2.0 * vn / denom;
  out.state_plus = s_minus;
  out.state_plus.qdot = s_minus.qdot + out.lambda * minv_n;
  out.residuals = lagrangian_residuals(sys, s_minus, out.state_plus, normal);
  return out;
}

ImpactResultL resolve_impact_newton(const SystemSpec& sys, const ContactStateL& s_minus,
                                    const SwitchingSurface& surface, const ImpactConfig& cfg) {
  detail::require_dimension(sys.n, s_minus.q, "q");
  detail::require_dimension(sys.n, s_minus.qdot, "qdot");
  const int n = sys.n;
  const Vec normal = checked_normal(surface, s_minus.q, cfg);
  const double vn = normal.dot(s_minus.qdot);
  check_grazing(vn, cfg);

  const LagrangianPartials pm = evaluate_partials(sys, s_minus);
  const double e_minus = s_minus.qdot.dot(pm.d_qdot) - pm.value;
  const double p_scale = std::max(1.0, pm.d_qdot.cwiseAbs().maxCoeff());
  const double e_scale = std::max(1.0, std::abs(e_minus));

  Eigen::PartialPivLU<Mat> w_lu(pm.hess_qdot);
  if (!(std::abs(w_lu.determinant()) > 0.0)) {
    throw Error(ErrorKind::SingularHessian, "velocity Hessian W is singular at the impact");
  }
  const Vec winv_n = w_lu.solve(normal);
  double mu = -2.0 * vn / normal.dot(winv_n);
  ContactStateL plus = s_minus;
  plus.qdot = s_minus.qdot + mu * winv_n;

  // Finite-difference partials stall near 1e-11; accept a stalled iterate
  // below this floor for such systems.
  constexpr double kNoiseFloor = 1e-9;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  bool converged = false;
  for (int it = 0; it <= cfg.max_iterations; ++it) {
    const LagrangianPartials pp = evaluate_partials(sys, plus);
    Vec f(n + 1);
    f.head(n) = (pp.d_qdot - pm.d_qdot - mu * normal) / p_scale;
    f[n] = (plus.qdot.dot(pp.d_qdot) - pp.value - e_minus) / e_scale;
    const double res = f.cwiseAbs().maxCoeff();
    if (res <= cfg.newton_tol) {
      converged = true;
      break;
    }
    if (res < 0.5 * best) {
      best = res;
      stalled = 0;
    } else if (++stalled >= 3 && !sys.partials && best <= kNoiseFloor) {
      converged = true;
      break;
    }
    if (it == cfg.max_iterations) break;
    Mat jac(n + 1, n + 1);
    jac.topLeftCorner(n, n) = pp.hess_qdot / p_scale;
    jac.topRightCorner(n, 1) = -normal / p_scale;
    jac.bottomLeftCorner(1, n) = (pp.hess_qdot * plus.qdot).transpose() / e_scale;
    jac(n, n) = 0.0;
    const Vec dx = jac.partialPivLu().solve(f);
    if (!dx.allFinite()) break;
    plus.qdot -= dx.head(n);
    mu -= dx[n];
  }
  if (!converged) {
    throw Error(ErrorKind::NoConvergence, "impact Newton iteration did not converge");
  }
  const double vn_plus = normal.dot(plus.qdot);
  if (!(vn_plus * vn < 0.0)) {
    throw Error(ErrorKind::ConvergedToIdentity,
                "impact Newton iteration converged to the identity root");
  }

  ImpactResultL out;
  out.state_plus = plus;
  out.lambda = mu;
  out.residuals = lagrangian_residuals(sys, s_minus, plus, normal);
  return out;
}

ImpactResultH resolve_impact_hamiltonian(const HamiltonianSpec& sys,
                                         const SwitchingSurface& surface,
                                         const ContactStateH& s_minus, const ImpactConfig& cfg) {
  detail::require_dimension(sys.n, s_minus.q, "q");
  detail::require_dimension(sys.n, s_minus.p, "p");
  const Vec normal = checked_normal(surface, s_minus.q, cfg);
  const HamiltonianPartials dm = evaluate_partials(sys, s_minus);
  const double vn = normal.dot(dm.d_p);
  check_grazing(vn, cfg);
  const double h_minus = dm.value;
  const double h_scale = std::max(1.0, std::abs(h_minus));

  auto along = [&](double lambda) {
    ContactStateH s = s_minus;
    s.p = s_minus.p + lambda * normal;
    return s;
  };

  // Curvature of lambda -> H(p- + lambda n) at zero.
  double curvature = 0.0;
  if (sys.natural) {
    curvature = normal.dot(sys.natural->mass(s_minus.q).partialPivLu().solve(normal));
  } else {
    const double delta = std::cbrt(std::numeric_limits<double>::epsilon()) *
                         std::max(1.0, s_minus.p.cwiseAbs().maxCoeff()) / normal.norm();
    const double vp = normal.dot(evaluate_partials(sys, along(delta)).d_p);
    const double vm = normal.dot(evaluate_partials(sys, along(-delta)).d_p);
    curvature = (vp - vm) / (2.0 * delta);
  }
  if (!(curvature > 0.0) || !std::isfinite(curvature)) {
    throw Error(ErrorKind::SingularMassMatrix, "H is not convex along the surface normal");
  }
  double lambda = -2.0 * vn / curvature;

  // Newton on psi(lambda) = (H(p- + lambda n) - H(p-)) / lambda, which drops
  // the identity root.
  bool converged = false;
  for (int it = 0; it <= cfg.max_iterations; ++it) {
    const HamiltonianPartials d = evaluate_partials(sys, along(lambda));
    const double phi = d.value - h_minus;
    if (std::abs(phi) <= cfg.newton_tol * h_scale) {
      converged = true;
      break;
    }
    if (it == cfg.max_iterations) break;
    const double dphi = normal.dot(d.d_p);
    const double psi = phi / lambda;
    const double dpsi = (lambda * dphi - phi) / (lambda * lambda);
    if (!(std::abs(dpsi) > 0.0)) break;
    lambda -= psi / dpsi;
    if (!std::isfinite(lambda)) break;
  }
  if (!converged) {
    throw Error(ErrorKind::NoConvergence, "Hamiltonian impact iteration did not converge");
  }

  ImpactResultH out;
  out.state_plus = along(lambda);
  out.lambda = lambda;
  const HamiltonianPartials dp = evaluate_partials(sys, out.state_plus);
  if (!(normal.dot(dp.d_p) * vn < 0.0)) {
    throw Error(ErrorKind::ConvergedToIdentity,
                "Hamiltonian impact iteration converged to the identity root");
  }
  out.residuals = {tangential_residual(tangent_basis(normal), s_minus.p, out.state_plus.p),
                   energy_residual(h_minus, dp.value)};
  return out;
}

}  // namespace herglotz
