#pragma once

// Adaptive Dormand-Prince 5(4) integration with the 4th-order continuous
// extension, and localization of interior-to-exterior crossings of a
// switching surface.
//
// States handed to integrate_until_event are packed as y = [q, v, z] with
// q and v of length n; the surface is evaluated on y.head(n) and the normal
// velocity uses the q-block of the vector field.

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "herglotz/contact_core.hpp"
#include "herglotz/surface.hpp"

namespace herglotz {

using VectorField = std::function<Vec(double t, const Vec& y)>;

struct StepperConfig {
  double rtol = 1e-10;
  double atol = 1e-10;
  double h_init = 1e-3;
  double h_max = 0.1;
  long max_steps = 10'000'000;

  void validate() const;
};

struct EventConfig {
  double t_tol = 1e-12;
  double h_tol = 1e-12;
  /// Only fire on decreasing h (interior to exterior).
  bool require_decreasing = true;
  double grazing_threshold = 1e-9;
  /// A boundary start stays disarmed until h exceeds this.
  double h_arm = 1e-9;
  /// Interpolant probes per step, so a chord clipping the boundary
  /// inside one step is not missed.
  int probes_per_step = 8;

  void validate() const;
};

/// Continuous extension of one accepted step.
class DenseSegment {
 public:
  DenseSegment() = default;
  DenseSegment(double t_start, double t_end, std::array<Vec, 5> coefficients, Vec y_end);

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  const Vec& y_start() const { return coeff_[0]; }
  const Vec& y_end() const { return y_end_; }

  /// Interpolated state; t may lie anywhere in [t_start, t_end].
  Vec evaluate(double t) const;

 private:
  double t_start_ = 0.0;
  double t_end_ = 0.0;
  std::array<Vec, 5> coeff_;
  Vec y_end_;
};

struct StepResult {
  Vec y;
  DenseSegment segment;
  double h_accepted = 0.0;
  double h_next = 0.0;
  double error_norm = 0.0;
};

/// One accepted adaptive step from (t, y), retrying with smaller steps as
/// needed. The step never passes t_limit.
StepResult step(const VectorField& rhs, double t, const Vec& y, double h_try,
                const StepperConfig& cfg,
                double t_limit = std::numeric_limits<double>::infinity());

/// A single Dormand-Prince step of exactly size h with no error control.
StepResult fixed_step(const VectorField& rhs, double t, const Vec& y, double h,
                      const StepperConfig& cfg);

struct FlowSegment {
  std::vector<DenseSegment> pieces;
  double t_start = 0.0;
  double t_end = 0.0;
  Vec y_start;
  Vec y_end;
};

/// Adaptive integration from t0 to t1 with no surface.
FlowSegment integrate(const VectorField& rhs, double t0, const Vec& y0, double t1,
                      const StepperConfig& cfg);

struct EventHit {
  double t = 0.0;
  /// State on the surface, projected so that |h(q)| <= h_tol.
  Vec y;
  double normal_velocity = 0.0;
};

struct FlowResult {
  FlowSegment segment;
  std::optional<EventHit> hit;
  double h_next = 0.0;
  long steps = 0;
};

/// Surface crossing test built from the packed layout [q, v, z].
struct EventFunction {
  int n = 0;
  const SwitchingSurface* surface = nullptr;
  const VectorField* rhs = nullptr;

  double value(const Vec& y) const;
  double normal_velocity(double t, const Vec& y) const;
};

struct LocatedEvent {
  double t = 0.0;
  Vec y;
};

/// Bracketed root of h(q(t)) on the interpolant by Illinois-style secant
/// with bisection fallback. [t_lo, t_hi] defaults to the whole segment.
LocatedEvent locate_event(const DenseSegment& segment, const EventFunction& event,
                          const EventConfig& ev, std::optional<double> t_lo = std::nullopt,
                          std::optional<double> t_hi = std::nullopt);

/// Integrates until h(q) crosses zero from above or t_final is reached.
/// `boundary_start` disarms the guard until h > ev.h_arm.
FlowResult integrate_until_event(const VectorField& rhs, double t0, const Vec& y0,
                                 double t_final, const SwitchingSurface& surface, int n,
                                 const StepperConfig& cfg, const EventConfig& ev,
                                 bool boundary_start = false,
                                 std::optional<double> h_hint = std::nullopt);

}  // namespace herglotz
