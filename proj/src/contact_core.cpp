#include "herglotz/contact_core.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace herglotz {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::SingularMassMatrix: return "SingularMassMatrix";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ConvergedToIdentity: return "ConvergedToIdentity";
    case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorKind::MaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorKind::NoSignChange: return "NoSignChange";
    case ErrorKind::GrazingContact: return "GrazingContact";
    case ErrorKind::DegenerateNormal: return "DegenerateNormal";
    case ErrorKind::ExteriorState: return "ExteriorState";
    case ErrorKind::OffBoundary: return "OffBoundary";
    case ErrorKind::TimeOutOfRange: return "TimeOutOfRange";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
  }
  return "Unknown";
}

namespace detail {

void require_dimension(int n, const Vec& v, const char* what) {
  if (v.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + " has length " +
                                                  std::to_string(v.size()) + ", expected " +
                                                  std::to_string(n));
  }
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, std::string(what) + " is not finite");
}

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw Error(ErrorKind::NonFinite, std::string(what) + " is not finite");
}

}  // namespace detail

namespace {

using detail::require_dimension;
using detail::require_finite;

const double kEps = std::numeric_limits<double>::epsilon();
const double kFirstStep = std::cbrt(kEps);
const double kSecondStep = std::sqrt(std::sqrt(kEps));

// Step that is exactly representable as (x + h) - x.
double fd_step(double x, double rel) {
  const double h = rel * std::max(1.0, std::abs(x));
  volatile double xp = x + h;
  return xp - x;
}

void check_state(int n, const ContactStateL& s) {
  require_dimension(n, s.q, "q");
  require_dimension(n, s.qdot, "qdot");
  require_finite(s.q, "q");
  require_finite(s.qdot, "qdot");
  require_finite(s.z, "z");
}

void check_state(int n, const ContactStateH& s) {
  require_dimension(n, s.q, "q");
  require_dimension(n, s.p, "p");
  require_finite(s.q, "q");
  require_finite(s.p, "p");
  require_finite(s.z, "z");
}

std::vector<Mat> mass_gradient(const NaturalForm& form, const Vec& q) {
  if (form.mass_gradient) return form.mass_gradient(q);
  std::vector<Mat> out;
  out.reserve(q.size());
  Vec qp = q;
  Vec qm = q;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    const double h = fd_step(q[k], kFirstStep);
    qp[k] = q[k] + h;
    qm[k] = q[k] - h;
    out.push_back((form.mass(qp) - form.mass(qm)) / (2.0 * h));
    qp[k] = q[k];
    qm[k] = q[k];
  }
  return out;
}

double potential_value(const NaturalForm& form, const Vec& q) {
  return form.potential ? form.potential(q) : 0.0;
}

Vec potential_grad(const NaturalForm& form, const Vec& q) {
  if (form.potential_gradient) return form.potential_gradient(q);
  Vec g = Vec::Zero(q.size());
  if (!form.potential) return g;
  Vec qp = q;
  Vec qm = q;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    const double h = fd_step(q[k], kFirstStep);
    qp[k] = q[k] + h;
    qm[k] = q[k] - h;
    g[k] = (form.potential(qp) - form.potential(qm)) / (2.0 * h);
    qp[k] = q[k];
    qm[k] = q[k];
  }
  return g;
}

Eigen::PartialPivLU<Mat> factor_mass(const Mat& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  Eigen::PartialPivLU<Mat> lu(m);
  const double det = std::abs(lu.determinant());
  const double n = static_cast<double>(m.rows());
  if (!(scale > 0.0) || !std::isfinite(det) ||
      std::pow(det, 1.0 / n) <= kRegularityTolerance * scale) {
    throw Error(ErrorKind::SingularMassMatrix, "mass matrix is singular");
  }
  return lu;
}

// Packed coordinates x = [q, qdot, z] for finite differences on L.
struct Packed {
  int n;
  const LagrangianFn& f;
  double operator()(const Vec& x) const {
    return f(x.head(n), x.segment(n, n), x[2 * n]);
  }
};

}  // namespace

SystemSpec make_natural_system(int n, NaturalForm form) {
  if (n <= 0) throw Error(ErrorKind::InvalidSpec, "dimension must be positive");
  if (!form.mass) throw Error(ErrorKind::InvalidSpec, "natural form needs a mass matrix evaluator");
  SystemSpec sys;
  sys.n = n;
  sys.natural = form;
  sys.lagrangian = [form](const Vec& q, const Vec& qdot, double z) {
    const Mat m = form.mass(q);
    return 0.5 * qdot.dot(m * qdot) - potential_value(form, q) - form.gamma * z;
  };
  sys.partials = [form](const Vec& q, const Vec& qdot, double z) {
    const Mat m = form.mass(q);
    const auto dm = mass_gradient(form, q);
    const Vec dv = potential_grad(form, q);
    LagrangianPartials p;
    const Vec mv = m * qdot;
    p.value = 0.5 * qdot.dot(mv) - potential_value(form, q) - form.gamma * z;
    p.d_qdot = mv;
    p.d_z = -form.gamma;
    p.hess_qdot = 0.5 * (m + m.transpose());
    p.mixed_z = Vec::Zero(q.size());
    p.d_q.resize(q.size());
    p.mixed_q.resize(q.size(), q.size());
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      const Vec dmv = dm[static_cast<std::size_t>(k)] * qdot;
      p.d_q[k] = 0.5 * qdot.dot(dmv) - dv[k];
      p.mixed_q.col(k) = dmv;
    }
    return p;
  };
  return sys;
}

SystemSpec make_lagrangian_system(int n, LagrangianFn lagrangian, LagrangianPartialsFn partials) {
  if (n <= 0) throw Error(ErrorKind::InvalidSpec, "dimension must be positive");
  if (!lagrangian) throw Error(ErrorKind::InvalidSpec, "missing Lagrangian evaluator");
  SystemSpec sys;
  sys.n = n;
  sys.lagrangian = std::move(lagrangian);
  sys.partials = std::move(partials);
  return sys;
}

HamiltonianSpec make_natural_hamiltonian(int n, NaturalForm form) {
  if (n <= 0) throw Error(ErrorKind::InvalidSpec, "dimension must be positive");
  if (!form.mass) throw Error(ErrorKind::InvalidSpec, "natural form needs a mass matrix evaluator");
  HamiltonianSpec sys;
  sys.n = n;
  sys.natural = form;
  sys.hamiltonian = [form](const Vec& q, const Vec& p, double z) {
    const Vec v = factor_mass(form.mass(q)).solve(p);
    return 0.5 * p.dot(v) + potential_value(form, q) + form.gamma * z;
  };
  sys.partials = [form](const Vec& q, const Vec& p, double z) {
    const Vec v = factor_mass(form.mass(q)).solve(p);
    const auto dm = mass_gradient(form, q);
    const Vec dv = potential_grad(form, q);
    HamiltonianPartials out;
    out.value = 0.5 * p.dot(v) + potential_value(form, q) + form.gamma * z;
    out.d_p = v;
    out.d_z = form.gamma;
    out.d_q.resize(q.size());
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      out.d_q[k] = -0.5 * v.dot(dm[static_cast<std::size_t>(k)] * v) + dv[k];
    }
    return out;
  };
  return sys;
}

HamiltonianSpec make_hamiltonian_system(int n, HamiltonianFn hamiltonian,
                                        HamiltonianPartialsFn partials) {
  if (n <= 0) throw Error(ErrorKind::InvalidSpec, "dimension must be positive");
  if (!hamiltonian) throw Error(ErrorKind::InvalidSpec, "missing Hamiltonian evaluator");
  HamiltonianSpec sys;
  sys.n = n;
  sys.hamiltonian = std::move(hamiltonian);
  sys.partials = std::move(partials);
  return sys;
}

LagrangianPartials finite_difference_partials(const SystemSpec& sys, const ContactStateL& s) {
  check_state(sys.n, s);
  const int n = sys.n;
  const Packed f{n, sys.lagrangian};
  Vec x(2 * n + 1);
  x << s.q, s.qdot, s.z;
  const int dim = 2 * n + 1;

  const double f0 = f(x);
  require_finite(f0, "L");

  Vec grad(dim);
  Vec h1(dim);
  Vec h2(dim);
  for (int k = 0; k < dim; ++k) {
    h1[k] = fd_step(x[k], kFirstStep);
    h2[k] = fd_step(x[k], kSecondStep);
    Vec xp = x;
    Vec xm = x;
    xp[k] += h1[k];
    xm[k] -= h1[k];
    const double fp = f(xp);
    const double fm = f(xm);
    require_finite(fp, "L sample");
    require_finite(fm, "L sample");
    grad[k] = (fp - fm) / (2.0 * h1[k]);
  }

  auto second = [&](int i, int j) {
    if (i == j) {
      Vec xp = x;
      Vec xm = x;
      xp[i] += h2[i];
      xm[i] -= h2[i];
      const double fp = f(xp);
      const double fm = f(xm);
      require_finite(fp, "L sample");
      require_finite(fm, "L sample");
      return (fp - 2.0 * f0 + fm) / (h2[i] * h2[i]);
    }
    double acc = 0.0;
    for (int si : {1, -1}) {
      for (int sj : {1, -1}) {
        Vec xs = x;
        xs[i] += si * h2[i];
        xs[j] += sj * h2[j];
        const double v = f(xs);
        require_finite(v, "L sample");
        acc += si * sj * v;
      }
    }
    return acc / (4.0 * h2[i] * h2[j]);
  };

  LagrangianPartials p;
  p.value = f0;
  p.d_q = grad.head(n);
  p.d_qdot = grad.segment(n, n);
  p.d_z = grad[2 * n];
  p.hess_qdot.resize(n, n);
  p.mixed_q.resize(n, n);
  p.mixed_z.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double w = second(n + i, n + j);
      p.hess_qdot(i, j) = w;
      p.hess_qdot(j, i) = w;
    }
    for (int j = 0; j < n; ++j) p.mixed_q(i, j) = second(n + i, j);
    p.mixed_z[i] = second(n + i, 2 * n);
  }
  p.hess_qdot = 0.5 * (p.hess_qdot + p.hess_qdot.transpose()).eval();
  return p;
}

HamiltonianPartials finite_difference_partials(const HamiltonianSpec& sys,
                                               const ContactStateH& s) {
  check_state(sys.n, s);
  const int n = sys.n;
  Vec x(2 * n + 1);
  x << s.q, s.p, s.z;
  auto f = [&](const Vec& y) { return sys.hamiltonian(y.head(n), y.segment(n, n), y[2 * n]); };
  HamiltonianPartials out;
  out.value = f(x);
  require_finite(out.value, "H");
  Vec grad(2 * n + 1);
  for (int k = 0; k < 2 * n + 1; ++k) {
    const double h = fd_step(x[k], kFirstStep);
    Vec xp = x;
    Vec xm = x;
    xp[k] += h;
    xm[k] -= h;
    grad[k] = (f(xp) - f(xm)) / (2.0 * h);
  }
  require_finite(grad, "H samples");
  out.d_q = grad.head(n);
  out.d_p = grad.segment(n, n);
  out.d_z = grad[2 * n];
  return out;
}

LagrangianPartials evaluate_partials(const SystemSpec& sys, const ContactStateL& s) {
  check_state(sys.n, s);
  if (!sys.partials) return finite_difference_partials(sys, s);
  LagrangianPartials p = sys.partials(s.q, s.qdot, s.z);
  require_finite(p.value, "L");
  require_finite(p.d_q, "dL/dq");
  require_finite(p.d_qdot, "dL/dqdot");
  require_finite(p.d_z, "dL/dz");
  return p;
}

HamiltonianPartials evaluate_partials(const HamiltonianSpec& sys, const ContactStateH& s) {
  check_state(sys.n, s);
  if (!sys.partials) return finite_difference_partials(sys, s);
  HamiltonianPartials p = sys.partials(s.q, s.p, s.z);
  require_finite(p.value, "H");
  require_finite(p.d_q, "dH/dq");
  require_finite(p.d_p, "dH/dp");
  require_finite(p.d_z, "dH/dz");
  return p;
}

double lagrangian_energy(const SystemSpec& sys, const ContactStateL& s) {
  const LagrangianPartials p = evaluate_partials(sys, s);
  const double e = s.qdot.dot(p.d_qdot) - p.value;
  require_finite(e, "E_L");
  return e;
}

double hamiltonian_value(const HamiltonianSpec& sys, const ContactStateH& s) {
  check_state(sys.n, s);
  const double h = sys.hamiltonian(s.q, s.p, s.z);
  require_finite(h, "H");
  return h;
}

HerglotzRate herglotz_rhs(const SystemSpec& sys, const ContactStateL& s) {
  const LagrangianPartials p = evaluate_partials(sys, s);
  const Mat& w = p.hess_qdot;
  const double scale = w.cwiseAbs().maxCoeff();
  Eigen::PartialPivLU<Mat> lu(w);
  const double det = std::abs(lu.determinant());
  if (!(scale > 0.0) || !std::isfinite(det) ||
      std::pow(det, 1.0 / sys.n) <= kRegularityTolerance * scale) {
    throw Error(ErrorKind::SingularHessian, "velocity Hessian W is not regular");
  }
  const Vec force = p.d_q - p.mixed_q * s.qdot - p.mixed_z * p.value + p.d_z * p.d_qdot;
  HerglotzRate r;
  r.qdot = s.qdot;
  r.qddot = lu.solve(force);
  r.zdot = p.value;
  require_finite(r.qddot, "qddot");
  return r;
}

HamiltonRate hamiltonian_rhs(const HamiltonianSpec& sys, const ContactStateH& s) {
  const HamiltonianPartials d = evaluate_partials(sys, s);
  HamiltonRate r;
  r.qdot = d.d_p;
  r.pdot = -d.d_q - s.p * d.d_z;
  r.zdot = s.p.dot(d.d_p) - d.value;
  require_finite(r.pdot, "pdot");
  require_finite(r.zdot, "zdot");
  return r;
}

ContactStateH legendre_forward(const SystemSpec& sys, const ContactStateL& s) {
  const LagrangianPartials p = evaluate_partials(sys, s);
  return ContactStateH{s.q, p.d_qdot, s.z, s.t};
}

ContactStateL legendre_inverse(const SystemSpec& sys, const ContactStateH& s) {
  check_state(sys.n, s);
  if (sys.natural) {
    const Vec v = factor_mass(sys.natural->mass(s.q)).solve(s.p);
    require_finite(v, "qdot");
    return ContactStateL{s.q, v, s.z, s.t};
  }
  constexpr int kMaxIterations = 50;
  constexpr double kTolerance = 1e-12;
  const double scale = std::max(1.0, s.p.cwiseAbs().maxCoeff());
  // Finite-difference partials carry noise near 1e-11, so a stalled iterate
  // below this floor is accepted.
  constexpr double kNoiseFloor = 1e-9;
  ContactStateL guess{s.q, s.p, s.z, s.t};
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 0; it < kMaxIterations; ++it) {
    const LagrangianPartials p = evaluate_partials(sys, guess);
    const Vec residual = p.d_qdot - s.p;
    const double res = residual.cwiseAbs().maxCoeff();
    if (res <= kTolerance * scale) return guess;
    if (res < 0.5 * best) {
      best = res;
      stalled = 0;
    } else if (++stalled >= 3 && !sys.partials && best <= kNoiseFloor * scale) {
      return guess;
    }
    Eigen::PartialPivLU<Mat> lu(p.hess_qdot);
    if (!(std::abs(lu.determinant()) > 0.0)) {
      throw Error(ErrorKind::SingularHessian, "velocity Hessian W is singular during inversion");
    }
    guess.qdot -= lu.solve(residual);
    require_finite(guess.qdot, "qdot iterate");
  }
  throw Error(ErrorKind::NoConvergence, "Legendre inverse did not converge in 50 iterations");
}

}  // namespace herglotz
