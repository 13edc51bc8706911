#include "herglotz/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace herglotz {

std::string to_string(Formulation f) {
  return f == Formulation::Lagrangian ? "lagrangian" : "hamiltonian";
}

std::string to_string(ResolverKind r) {
  switch (r) {
    case ResolverKind::Natural: return "natural";
    case ResolverKind::Newton: return "newton";
    case ResolverKind::Hamiltonian: return "hamiltonian";
    case ResolverKind::Custom: return "custom";
  }
  return "unknown";
}

std::string to_string(TerminalStatus s) {
  switch (s) {
    case TerminalStatus::Completed: return "Completed";
    case TerminalStatus::ZenoSuspected: return "ZenoSuspected";
    case TerminalStatus::GrazingStop: return "GrazingStop";
    case TerminalStatus::EventBudgetExhausted: return "EventBudgetExhausted";
  }
  return "Unknown";
}

void HybridSystem::validate() const {
  if (n <= 0) throw Error(ErrorKind::InvalidSpec, "hybrid system dimension must be positive");
  if (!surface.h || !surface.grad_h) {
    throw Error(ErrorKind::InvalidSpec, "switching surface needs h and grad h");
  }
  if (formulation == Formulation::Lagrangian) {
    if (!lagrangian || lagrangian->n != n) {
      throw Error(ErrorKind::InvalidSpec, "Lagrangian formulation needs a matching SystemSpec");
    }
    if (resolver == ResolverKind::Hamiltonian) {
      throw Error(ErrorKind::InvalidSpec, "Hamiltonian resolver needs the Hamiltonian formulation");
    }
    if (resolver == ResolverKind::Natural && !lagrangian->natural) {
      throw Error(ErrorKind::InvalidSpec, "natural resolver needs natural-form data");
    }
  } else {
    if (!hamiltonian || hamiltonian->n != n) {
      throw Error(ErrorKind::InvalidSpec,
                  "Hamiltonian formulation needs a matching HamiltonianSpec");
    }
    if (resolver == ResolverKind::Natural || resolver == ResolverKind::Newton) {
      throw Error(ErrorKind::InvalidSpec, "Lagrangian resolvers need the Lagrangian formulation");
    }
  }
  if (resolver == ResolverKind::Custom && !custom) {
    throw Error(ErrorKind::InvalidSpec, "custom resolver selected but not provided");
  }
}

Vec pack(const ContactStateL& s) {
  Vec y(2 * s.q.size() + 1);
  y << s.q, s.qdot, s.z;
  return y;
}

Vec pack(const ContactStateH& s) {
  Vec y(2 * s.q.size() + 1);
  y << s.q, s.p, s.z;
  return y;
}

ContactStateL unpack_lagrangian(int n, double t, const Vec& y) {
  return ContactStateL{y.head(n), y.segment(n, n), y[2 * n], t};
}

ContactStateH unpack_hamiltonian(int n, double t, const Vec& y) {
  return ContactStateH{y.head(n), y.segment(n, n), y[2 * n], t};
}

VectorField make_vector_field(const HybridSystem& hs) {
  const int n = hs.n;
  if (hs.formulation == Formulation::Lagrangian) {
    const SystemSpec sys = *hs.lagrangian;
    return [sys, n](double t, const Vec& y) {
      const HerglotzRate r = herglotz_rhs(sys, unpack_lagrangian(n, t, y));
      Vec out(2 * n + 1);
      out << r.qdot, r.qddot, r.zdot;
      return out;
    };
  }
  const HamiltonianSpec sys = *hs.hamiltonian;
  return [sys, n](double t, const Vec& y) {
    const HamiltonRate r = hamiltonian_rhs(sys, unpack_hamiltonian(n, t, y));
    Vec out(2 * n + 1);
    out << r.qdot, r.pdot, r.zdot;
    return out;
  };
}

double state_energy(const HybridSystem& hs, double t, const Vec& y) {
  if (hs.formulation == Formulation::Lagrangian) {
    return lagrangian_energy(*hs.lagrangian, unpack_lagrangian(hs.n, t, y));
  }
  return hamiltonian_value(*hs.hamiltonian, unpack_hamiltonian(hs.n, t, y));
}

Vec state_velocity(const HybridSystem& hs, double t, const Vec& y) {
  if (hs.formulation == Formulation::Lagrangian) return y.segment(hs.n, hs.n);
  return evaluate_partials(*hs.hamiltonian, unpack_hamiltonian(hs.n, t, y)).d_p;
}

double dissipation_rate(const HybridSystem& hs, double t, const Vec& y) {
  if (hs.formulation == Formulation::Lagrangian) {
    return evaluate_partials(*hs.lagrangian, unpack_lagrangian(hs.n, t, y)).d_z;
  }
  return -evaluate_partials(*hs.hamiltonian, unpack_hamiltonian(hs.n, t, y)).d_z;
}

namespace {

ImpactConfig impact_config(const EventConfig& ev) {
  ImpactConfig c;
  c.boundary_tol = ev.h_tol;
  c.grazing_threshold = ev.grazing_threshold;
  return c;
}

CustomImpact resolve(const HybridSystem& hs, double t, const Vec& y, const ImpactConfig& cfg) {
  const int n = hs.n;
  switch (hs.resolver) {
    case ResolverKind::Natural: {
      const auto r = resolve_impact_natural(*hs.lagrangian, unpack_lagrangian(n, t, y),
                                            hs.surface, cfg);
      return {r.state_plus.qdot, r.lambda, r.residuals};
    }
    case ResolverKind::Newton: {
      const auto r = resolve_impact_newton(*hs.lagrangian, unpack_lagrangian(n, t, y),
                                           hs.surface, cfg);
      return {r.state_plus.qdot, r.lambda, r.residuals};
    }
    case ResolverKind::Hamiltonian: {
      const auto r = resolve_impact_hamiltonian(*hs.hamiltonian, hs.surface,
                                                unpack_hamiltonian(n, t, y), cfg);
      return {r.state_plus.p, r.lambda, r.residuals};
    }
    case ResolverKind::Custom:
      return hs.custom(t, y);
  }
  throw Error(ErrorKind::InvalidSpec, "unknown resolver");
}

HybridTrajectory run(const HybridSystem& hs, double t0, const Vec& y0, double t_final,
                     const HybridOptions& opts) {
  hs.validate();
  opts.stepper.validate();
  opts.events.validate();
  const int n = hs.n;
  if (y0.size() != 2 * n + 1) {
    throw Error(ErrorKind::DimensionMismatch, "initial state has the wrong dimension");
  }
  if (!(t_final > t0)) throw Error(ErrorKind::InvalidSpec, "t_final must exceed the start time");
  const double g0 = hs.surface.h(y0.head(n));
  if (!(g0 > 0.0)) {
    throw Error(ErrorKind::ExteriorState, "initial state must be strictly interior");
  }

  HybridTrajectory traj;
  traj.n = n;
  traj.formulation = hs.formulation;
  traj.t_start = t0;
  traj.t_end = t0;

  const VectorField rhs = make_vector_field(hs);
  const ImpactConfig icfg = impact_config(opts.events);
  const double zeno_window = opts.zeno_window_factor * opts.events.t_tol;

  double t = t0;
  Vec y = y0;
  bool boundary_start = false;
  std::optional<double> h_hint;
  int close_run = 0;

  auto annotate = [&](const Error& e) {
    return Error(e.kind(), "after event " + std::to_string(traj.events.size()) + ": " +
                               e.message());
  };

  for (;;) {
    if (static_cast<long>(traj.events.size()) >= opts.max_events) {
      traj.status = TerminalStatus::EventBudgetExhausted;
      break;
    }
    FlowResult flow;
    try {
      flow = integrate_until_event(rhs, t, y, t_final, hs.surface, n, opts.stepper, opts.events,
                                   boundary_start, h_hint);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::GrazingContact) {
        traj.status = TerminalStatus::GrazingStop;
        traj.status_message = e.message();
        break;
      }
      throw annotate(e);
    }
    traj.t_end = flow.segment.t_end;
    traj.segments.push_back(std::move(flow.segment));
    if (!flow.hit) {
      traj.status = TerminalStatus::Completed;
      break;
    }

    EventHit& hit = *flow.hit;
    CustomImpact reset;
    try {
      reset = resolve(hs, hit.t, hit.y, icfg);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::GrazingContact) {
        traj.status = TerminalStatus::GrazingStop;
        traj.status_message = e.message();
        break;
      }
      throw annotate(e);
    }

    ImpactEvent ev;
    ev.index = static_cast<int>(traj.events.size());
    ev.t = hit.t;
    ev.q = hit.y.head(n);
    ev.state_minus = hit.y;
    ev.state_plus = hit.y;
    ev.state_plus.segment(n, n) = reset.v_plus;
    ev.lambda = reset.lambda;
    ev.residuals = reset.residuals;

    const double gap = traj.events.empty() ? std::numeric_limits<double>::infinity()
                                           : ev.t - traj.events.back().t;
    y = ev.state_plus;
    t = ev.t;
    traj.events.push_back(std::move(ev));

    if (gap <= opts.events.t_tol) {
      traj.status = TerminalStatus::ZenoSuspected;
      traj.status_message = "events closer than t_tol";
      break;
    }
    close_run = gap < zeno_window ? close_run + 1 : 0;
    if (close_run >= opts.zeno_run) {
      traj.status = TerminalStatus::ZenoSuspected;
      traj.status_message = "accumulating impacts";
      break;
    }
    boundary_start = true;
    h_hint = flow.h_next;
  }
  return traj;
}

// Index of the segment whose open interior or closing end contains t.
const FlowSegment& find_segment(const HybridTrajectory& traj, double t) {
  auto it = std::lower_bound(traj.segments.begin(), traj.segments.end(), t,
                             [](const FlowSegment& s, double v) { return s.t_end < v; });
  if (it == traj.segments.end()) --it;
  return *it;
}

Vec evaluate_segment(const FlowSegment& seg, double t) {
  if (t == seg.t_start) return seg.y_start;
  if (t == seg.t_end) return seg.y_end;
  auto it = std::lower_bound(seg.pieces.begin(), seg.pieces.end(), t,
                             [](const DenseSegment& p, double v) { return p.t_end() < v; });
  if (it == seg.pieces.end()) --it;
  return it->evaluate(t);
}

}  // namespace

HybridTrajectory simulate(const HybridSystem& hs, const ContactStateL& s0, double t_final,
                          const HybridOptions& opts) {
  if (hs.formulation != Formulation::Lagrangian) {
    throw Error(ErrorKind::InvalidSpec, "Lagrangian initial state for a Hamiltonian system");
  }
  return run(hs, s0.t, pack(s0), t_final, opts);
}

HybridTrajectory simulate(const HybridSystem& hs, const ContactStateH& s0, double t_final,
                          const HybridOptions& opts) {
  if (hs.formulation != Formulation::Hamiltonian) {
    throw Error(ErrorKind::InvalidSpec, "Hamiltonian initial state for a Lagrangian system");
  }
  return run(hs, s0.t, pack(s0), t_final, opts);
}

std::vector<SampleRow> sample(const HybridTrajectory& traj, const std::vector<double>& times) {
  if (traj.segments.empty()) throw Error(ErrorKind::TimeOutOfRange, "empty trajectory");
  std::vector<SampleRow> rows;
  rows.reserve(times.size());
  for (const double t : times) {
    if (!(t >= traj.t_start && t <= traj.t_end)) {
      throw Error(ErrorKind::TimeOutOfRange,
                  "sample time " + std::to_string(t) + " outside trajectory span");
    }
    auto ev = std::lower_bound(traj.events.begin(), traj.events.end(), t,
                               [](const ImpactEvent& e, double v) { return e.t < v; });
    if (ev != traj.events.end() && ev->t == t) {
      rows.push_back({t, ev->state_minus, SampleFlag::PreImpact});
      rows.push_back({t, ev->state_plus, SampleFlag::PostImpact});
      continue;
    }
    rows.push_back({t, evaluate_segment(find_segment(traj, t), t), SampleFlag::Flow});
  }
  return rows;
}

std::vector<SampleRow> sample_uniform(const HybridTrajectory& traj, int count) {
  if (count < 2) throw Error(ErrorKind::InvalidSpec, "need at least two samples");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(count) + 2 * traj.events.size());
  const double span = traj.t_end - traj.t_start;
  for (int k = 0; k < count; ++k) {
    times.push_back(k == count - 1 ? traj.t_end
                                   : traj.t_start + span * (static_cast<double>(k) / (count - 1)));
  }
  for (const auto& e : traj.events) times.push_back(e.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return sample(traj, times);
}

}  // namespace herglotz
