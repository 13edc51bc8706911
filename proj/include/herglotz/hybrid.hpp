#pragma once

// Flow -> guard -> reset loop of a simple hybrid contact system.
//
// Internally states are packed as y = [q, v, z] where v is qdot for the
// Lagrangian formulation and p for the Hamiltonian one.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "herglotz/contact_core.hpp"
#include "herglotz/impact.hpp"
#include "herglotz/integrator.hpp"

namespace herglotz {

enum class Formulation { Lagrangian, Hamiltonian };
enum class ResolverKind { Natural, Newton, Hamiltonian, Custom };
enum class TerminalStatus { Completed, ZenoSuspected, GrazingStop, EventBudgetExhausted };

std::string to_string(Formulation f);
std::string to_string(ResolverKind r);
std::string to_string(TerminalStatus s);

struct CustomImpact {
  Vec v_plus;
  double lambda = 0.0;
  ImpactResiduals residuals;
};

/// User-supplied reset: packed pre-impact state at time t -> post-impact v.
using CustomResolver = std::function<CustomImpact(double t, const Vec& y_minus)>;

struct HybridSystem {
  int n = 0;
  Formulation formulation = Formulation::Lagrangian;
  std::optional<SystemSpec> lagrangian;
  std::optional<HamiltonianSpec> hamiltonian;
  SwitchingSurface surface;
  ResolverKind resolver = ResolverKind::Natural;
  CustomResolver custom;

  void validate() const;
};

struct ImpactEvent {
  int index = 0;
  double t = 0.0;
  Vec q;
  Vec state_minus;
  Vec state_plus;
  double lambda = 0.0;
  ImpactResiduals residuals;

  Vec v_minus(int n) const { return state_minus.segment(n, n); }
  Vec v_plus(int n) const { return state_plus.segment(n, n); }
  double z() const { return state_minus[state_minus.size() - 1]; }
};

struct HybridTrajectory {
  int n = 0;
  Formulation formulation = Formulation::Lagrangian;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<FlowSegment> segments;
  std::vector<ImpactEvent> events;
  TerminalStatus status = TerminalStatus::Completed;
  std::string status_message;
};

/// 0 = flow sample, 1 = pre-impact limit, 2 = post-impact limit.
enum class SampleFlag : int { Flow = 0, PreImpact = 1, PostImpact = 2 };

struct SampleRow {
  double t = 0.0;
  Vec y;
  SampleFlag flag = SampleFlag::Flow;
};

struct HybridOptions {
  StepperConfig stepper;
  EventConfig events;
  long max_events = 1'000'000;
  /// Stop with ZenoSuspected after this many consecutive events closer
  /// together than zeno_window_factor * t_tol.
  int zeno_run = 50;
  double zeno_window_factor = 100.0;
};

Vec pack(const ContactStateL& s);
Vec pack(const ContactStateH& s);
ContactStateL unpack_lagrangian(int n, double t, const Vec& y);
ContactStateH unpack_hamiltonian(int n, double t, const Vec& y);

/// Vector field of the system on packed states.
VectorField make_vector_field(const HybridSystem& hs);

/// E_L for the Lagrangian formulation, H for the Hamiltonian one.
double state_energy(const HybridSystem& hs, double t, const Vec& y);
/// dq/dt at a packed state.
Vec state_velocity(const HybridSystem& hs, double t, const Vec& y);
/// Relative dissipation rate r with dE/dt = r E: dL/dz or -dH/dz.
double dissipation_rate(const HybridSystem& hs, double t, const Vec& y);

HybridTrajectory simulate(const HybridSystem& hs, const ContactStateL& s0, double t_final,
                          const HybridOptions& opts = {});
HybridTrajectory simulate(const HybridSystem& hs, const ContactStateH& s0, double t_final,
                          const HybridOptions& opts = {});

/// States at the requested times. At an event time both one-sided limits are
/// returned (flags 1 then 2).
std::vector<SampleRow> sample(const HybridTrajectory& traj, const std::vector<double>& times);

/// `count` uniform times over [t_start, t_end] merged with every event's
/// limits, in time order.
std::vector<SampleRow> sample_uniform(const HybridTrajectory& traj, int count);

}  // namespace herglotz
