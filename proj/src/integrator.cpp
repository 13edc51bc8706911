#include "herglotz/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace herglotz {

namespace {

// Dormand & Prince (1980) coefficients with the dense output of Hairer,
// Norsett & Wanner (DOPRI5 contd5).
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

struct Attempt {
  Vec y1;
  std::array<Vec, 5> coeff;
  double err = 0.0;
};

Vec eval_rhs(const VectorField& rhs, double t, const Vec& y) {
  Vec k = rhs(t, y);
  if (k.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "vector field returned wrong length");
  }
  if (!k.allFinite()) throw Error(ErrorKind::NonFinite, "vector field is not finite");
  return k;
}

Attempt attempt(const VectorField& rhs, double t, const Vec& y, double h,
                const StepperConfig& cfg) {
  const Vec k1 = eval_rhs(rhs, t, y);
  const Vec k2 = eval_rhs(rhs, t + c2 * h, y + h * (a21 * k1));
  const Vec k3 = eval_rhs(rhs, t + c3 * h, y + h * (a31 * k1 + a32 * k2));
  const Vec k4 = eval_rhs(rhs, t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const Vec k5 =
      eval_rhs(rhs, t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Vec k6 = eval_rhs(rhs, t + h,
                          y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  Attempt a;
  a.y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
  const Vec k7 = eval_rhs(rhs, t + h, a.y1);

  const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double sc = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(a.y1[i]));
    const double r = err[i] / sc;
    acc += r * r;
  }
  a.err = std::sqrt(acc / static_cast<double>(y.size()));

  a.coeff[0] = y;
  a.coeff[1] = a.y1 - y;
  a.coeff[2] = h * k1 - a.coeff[1];
  a.coeff[3] = a.coeff[1] - h * k7 - a.coeff[2];
  a.coeff[4] = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
  return a;
}

double min_step(double t) {
  return 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
}

}  // namespace

void StepperConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "rtol and atol must be positive");
  }
  if (!(h_init > 0.0) || !(h_max > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "h_init and h_max must be positive");
  }
  if (max_steps < 1) throw Error(ErrorKind::InvalidSpec, "max_steps must be at least 1");
}

void EventConfig::validate() const {
  if (!(t_tol > 0.0) || !(h_tol > 0.0) || !(grazing_threshold > 0.0) || !(h_arm > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "event tolerances must be positive");
  }
  if (probes_per_step < 0) throw Error(ErrorKind::InvalidSpec, "probes_per_step must be >= 0");
}

DenseSegment::DenseSegment(double t_start, double t_end, std::array<Vec, 5> coefficients,
                           Vec y_end)
    : t_start_(t_start), t_end_(t_end), coeff_(std::move(coefficients)), y_end_(std::move(y_end)) {}

Vec DenseSegment::evaluate(double t) const {
  const double h = t_end_ - t_start_;
  if (h == 0.0) return coeff_[0];
  const double th = (t - t_start_) / h;
  const double th1 = 1.0 - th;
  return coeff_[0] + th * (coeff_[1] + th1 * (coeff_[2] + th * (coeff_[3] + th1 * coeff_[4])));
}

StepResult fixed_step(const VectorField& rhs, double t, const Vec& y, double h,
                      const StepperConfig& cfg) {
  Attempt a = attempt(rhs, t, y, h, cfg);
  StepResult r;
  r.y = a.y1;
  r.segment = DenseSegment(t, t + h, std::move(a.coeff), a.y1);
  r.h_accepted = h;
  r.h_next = h;
  r.error_norm = a.err;
  return r;
}

StepResult step(const VectorField& rhs, double t, const Vec& y, double h_try,
                const StepperConfig& cfg, double t_limit) {
  if (!y.allFinite()) throw Error(ErrorKind::NonFinite, "state is not finite");
  double h = std::min(h_try, cfg.h_max);
  bool rejected = false;
  for (;;) {
    bool clamped = false;
    if (t + h >= t_limit) {
      h = t_limit - t;
      clamped = true;
    }
    if (h < min_step(t)) {
      throw Error(ErrorKind::StepSizeUnderflow, "step size underflow at t = " + std::to_string(t));
    }
    Attempt a = attempt(rhs, t, y, h, cfg);
    if (a.err <= 1.0) {
      double fac = a.err == 0.0 ? kMaxFactor : kSafety * std::pow(a.err, -0.2);
      fac = std::clamp(fac, kMinFactor, rejected ? 1.0 : kMaxFactor);
      StepResult r;
      const double t_end = clamped ? t_limit : t + h;
      r.y = a.y1;
      r.segment = DenseSegment(t, t_end, std::move(a.coeff), a.y1);
      r.h_accepted = h;
      r.h_next = std::min(h * fac, cfg.h_max);
      if (clamped) r.h_next = std::max(r.h_next, std::min(h_try, cfg.h_max));
      r.error_norm = a.err;
      return r;
    }
    rejected = true;
    const double fac = std::max(kMinFactor, kSafety * std::pow(a.err, -0.2));
    h *= fac;
  }
}

FlowSegment integrate(const VectorField& rhs, double t0, const Vec& y0, double t1,
                      const StepperConfig& cfg) {
  cfg.validate();
  if (!(t1 > t0)) throw Error(ErrorKind::InvalidSpec, "t1 must exceed t0");
  FlowSegment out;
  out.t_start = t0;
  out.y_start = y0;
  double t = t0;
  Vec y = y0;
  double h = cfg.h_init;
  long steps = 0;
  while (t < t1) {
    if (++steps > cfg.max_steps) throw Error(ErrorKind::MaxStepsExceeded, "step budget exhausted");
    StepResult r = step(rhs, t, y, h, cfg, t1);
    t = r.segment.t_end();
    y = r.y;
    h = r.h_next;
    out.pieces.push_back(std::move(r.segment));
  }
  out.t_end = t;
  out.y_end = y;
  return out;
}

double EventFunction::value(const Vec& y) const { return surface->h(y.head(n)); }

double EventFunction::normal_velocity(double t, const Vec& y) const {
  const Vec grad = surface->grad_h(y.head(n));
  const Vec qdot = (*rhs)(t, y).head(n);
  return grad.dot(qdot);
}

LocatedEvent locate_event(const DenseSegment& segment, const EventFunction& event,
                          const EventConfig& ev, std::optional<double> t_lo,
                          std::optional<double> t_hi) {
  double a = t_lo.value_or(segment.t_start());
  double b = t_hi.value_or(segment.t_end());
  Vec ya = segment.evaluate(a);
  Vec yb = segment.evaluate(b);
  double ga = event.value(ya);
  double gb = event.value(yb);

  const bool sign_change = ev.require_decreasing ? (ga > 0.0 && gb <= 0.0) : (ga * gb <= 0.0);
  if (!sign_change) {
    throw Error(ErrorKind::NoSignChange, "surface function does not change sign on [" +
                                             std::to_string(a) + ", " + std::to_string(b) + "]");
  }

  // Illinois variant of regula falsi; falls back to bisection when the
  // secant point leaves the inner part of the bracket.
  int side = 0;
  double t = b;
  Vec y = yb;
  double g = gb;
  constexpr int kMaxIterations = 200;
  for (int it = 0; it < kMaxIterations; ++it) {
    const double width = b - a;
    if (std::abs(ga) <= ev.h_tol && width <= ev.t_tol) {
      t = a, y = ya, g = ga;
      break;
    }
    if (std::abs(gb) <= ev.h_tol && width <= ev.t_tol) {
      t = b, y = yb, g = gb;
      break;
    }
    double m = (ga * b - gb * a) / (ga - gb);
    const double lo = a + 0.01 * width;
    const double hi = b - 0.01 * width;
    if (!std::isfinite(m) || m <= lo || m >= hi) m = 0.5 * (a + b);
    if (m <= a || m >= b) {
      // Bracket at floating-point resolution.
      if (std::abs(ga) <= std::abs(gb)) {
        t = a, y = ya, g = ga;
      } else {
        t = b, y = yb, g = gb;
      }
      break;
    }
    const Vec ym = segment.evaluate(m);
    const double gm = event.value(ym);
    if (gm == 0.0) {
      t = m, y = ym, g = gm;
      break;
    }
    if ((gm > 0.0) == (ga > 0.0)) {
      a = m, ya = ym, ga = gm;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      b = m, yb = ym, gb = gm;
      if (side == 1) ga *= 0.5;
      side = 1;
    }
    // Restore true values after Illinois down-weighting once the bracket is
    // tight, so the stopping test sees real residuals.
    if (b - a <= ev.t_tol) {
      ga = event.value(ya);
      gb = event.value(yb);
    }
    t = std::abs(ga) <= std::abs(gb) ? a : b;
    y = std::abs(ga) <= std::abs(gb) ? ya : yb;
    g = std::abs(ga) <= std::abs(gb) ? ga : gb;
  }
  (void)g;

  const double vn = event.normal_velocity(t, y);
  if (std::abs(vn) < ev.grazing_threshold) {
    throw Error(ErrorKind::GrazingContact,
                "normal velocity " + std::to_string(vn) + " below grazing threshold at t = " +
                    std::to_string(t));
  }
  return LocatedEvent{t, y};
}

namespace {

// Refines a located crossing by restepping from the piece start exactly to
// the crossing time, then projects q onto h = 0 along grad h.
EventHit polish_event(const VectorField& rhs, const DenseSegment& piece, const EventFunction& fn,
                      double t_guess, double t_lo, double t_hi, const StepperConfig& cfg,
                      const EventConfig& ev, DenseSegment& truncated) {
  const int n = fn.n;
  const SwitchingSurface& surface = *fn.surface;
  double t = t_guess;
  StepResult r;
  for (int it = 0; it < 4; ++it) {
    const double h = t - piece.t_start();
    if (h > 0.0) {
      r = fixed_step(rhs, piece.t_start(), piece.y_start(), h, cfg);
    } else {
      r.y = piece.y_start();
      std::array<Vec, 5> c{piece.y_start(), Vec::Zero(r.y.size()), Vec::Zero(r.y.size()),
                           Vec::Zero(r.y.size()), Vec::Zero(r.y.size())};
      r.segment = DenseSegment(t, t, std::move(c), r.y);
    }
    const double g = fn.value(r.y);
    if (std::abs(g) <= 0.1 * ev.h_tol) break;
    const double vn = fn.normal_velocity(t, r.y);
    if (std::abs(vn) < ev.grazing_threshold) break;
    const double t_new = std::clamp(t - g / vn, t_lo, t_hi);
    if (t_new == t) break;
    t = t_new;
  }
  truncated = r.segment;

  Vec y = r.y;
  for (int it = 0; it < 3; ++it) {
    const Vec q = y.head(n);
    const double g = surface.h(q);
    if (std::abs(g) <= 0.1 * ev.h_tol) break;
    const Vec grad = surface.grad_h(q);
    const double g2 = grad.squaredNorm();
    if (!(g2 > 0.0)) throw Error(ErrorKind::DegenerateNormal, "grad h vanishes at the crossing");
    y.head(n) = q - (g / g2) * grad;
  }
  const double g_final = surface.h(y.head(n));
  if (std::abs(g_final) > ev.h_tol) {
    throw Error(ErrorKind::NoConvergence,
                "projection onto the surface left |h| = " + std::to_string(std::abs(g_final)));
  }
  EventHit hit;
  hit.t = t;
  hit.y = y;
  hit.normal_velocity = fn.normal_velocity(t, y);
  if (std::abs(hit.normal_velocity) < ev.grazing_threshold) {
    throw Error(ErrorKind::GrazingContact, "grazing contact at t = " + std::to_string(t));
  }
  return hit;
}

}  // namespace

FlowResult integrate_until_event(const VectorField& rhs, double t0, const Vec& y0,
                                 double t_final, const SwitchingSurface& surface, int n,
                                 const StepperConfig& cfg, const EventConfig& ev,
                                 bool boundary_start, std::optional<double> h_hint) {
  cfg.validate();
  ev.validate();
  if (y0.size() != 2 * n + 1) {
    throw Error(ErrorKind::DimensionMismatch, "packed state must have length 2n + 1");
  }
  if (!(t_final > t0)) throw Error(ErrorKind::InvalidSpec, "t_final must exceed t0");

  const EventFunction fn{n, &surface, &rhs};
  double g = fn.value(y0);
  if (!std::isfinite(g)) throw Error(ErrorKind::NonFinite, "h(q0) is not finite");
  if (g < -ev.h_tol || (!boundary_start && g <= 0.0)) {
    throw Error(ErrorKind::ExteriorState, "initial state is not strictly interior (h = " +
                                              std::to_string(g) + ")");
  }
  bool armed = !boundary_start || g > ev.h_arm;
  bool moved_inward = false;

  FlowResult out;
  out.segment.t_start = t0;
  out.segment.y_start = y0;
  double t = t0;
  Vec y = y0;
  double h = h_hint.value_or(cfg.h_init);

  while (t < t_final) {
    if (++out.steps > cfg.max_steps) {
      throw Error(ErrorKind::MaxStepsExceeded, "step budget exhausted at t = " + std::to_string(t));
    }
    StepResult r = step(rhs, t, y, h, cfg, t_final);
    const DenseSegment& seg = r.segment;

    double prev_t = seg.t_start();
    const int probes = ev.probes_per_step;
    bool retry = false;
    for (int k = 1; k <= probes + 1; ++k) {
      const bool last = k == probes + 1;
      const double ts = last ? seg.t_end()
                             : seg.t_start() + (seg.t_end() - seg.t_start()) *
                                                   (static_cast<double>(k) / (probes + 1));
      const double gs = fn.value(last ? r.y : seg.evaluate(ts));
      if (!armed) {
        if (gs > ev.h_arm) {
          armed = true;
          prev_t = ts;
          continue;
        }
        if (gs > 0.0) {
          moved_inward = true;
          prev_t = ts;
          continue;
        }
        if (!(gs < -ev.h_tol)) continue;
        if (!moved_inward) {
          // The inward arc after a low bounce can fall between probes. Retry
          // with a step that ends before this probe.
          const double shorter = (ts - seg.t_start()) / (probes + 1);
          if (shorter > 1e-14 * std::max(1.0, std::abs(t))) {
            h = shorter;
            retry = true;
            break;
          }
          throw Error(ErrorKind::ExteriorState,
                      "trajectory left the admissible region without re-arming at t = " +
                          std::to_string(ts));
        }
        // A bounce too low to reach h_arm: bracketed by the last interior probe.
      } else if (gs > 0.0) {
        prev_t = ts;
        continue;
      }
      const LocatedEvent loc = locate_event(seg, fn, ev, prev_t, ts);
      DenseSegment truncated;
      EventHit hit = polish_event(rhs, seg, fn, loc.t, prev_t, ts, cfg, ev, truncated);
      out.segment.pieces.push_back(std::move(truncated));
      out.segment.t_end = hit.t;
      out.segment.y_end = hit.y;
      out.hit = std::move(hit);
      out.h_next = r.h_next;
      return out;
    }
    if (retry) continue;

    t = seg.t_end();
    y = r.y;
    h = r.h_next;
    out.segment.pieces.push_back(std::move(r.segment));
  }
  out.segment.t_end = t;
  out.segment.y_end = y;
  out.h_next = h;
  return out;
}

}  // namespace herglotz
