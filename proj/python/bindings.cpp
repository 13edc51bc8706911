#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "herglotz/cli/commands.hpp"
#include "herglotz/diagnostics.hpp"
#include "herglotz/systems.hpp"

namespace py = pybind11;
using namespace herglotz;

namespace {

Formulation parse_formulation(const std::string& s) {
  if (s == "lagrangian") return Formulation::Lagrangian;
  if (s == "hamiltonian") return Formulation::Hamiltonian;
  throw py::value_error("formulation must be 'lagrangian' or 'hamiltonian'");
}

HybridOptions options(double rtol, double atol, double h_max, long max_events) {
  HybridOptions o;
  o.stepper.rtol = rtol;
  o.stepper.atol = atol;
  o.stepper.h_max = h_max;
  o.max_events = max_events;
  return o;
}

HybridTrajectory run(const HybridSystem& hs, const Vec& q, const Vec& v, double z, double t_final,
                     const HybridOptions& opts) {
  if (hs.formulation == Formulation::Lagrangian) {
    return simulate(hs, ContactStateL{q, v, z, 0.0}, t_final, opts);
  }
  return simulate(hs, ContactStateH{q, v, z, 0.0}, t_final, opts);
}

// Samples as (t, y, flag) arrays, y with one row per sample.
py::tuple sample_arrays(const std::vector<SampleRow>& rows, int n) {
  Vec t(static_cast<Eigen::Index>(rows.size()));
  Mat y(static_cast<Eigen::Index>(rows.size()), 2 * n + 1);
  Eigen::VectorXi flag(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    t[i] = rows[k].t;
    y.row(i) = rows[k].y.transpose();
    flag[i] = static_cast<int>(rows[k].flag);
  }
  return py::make_tuple(t, y, flag);
}

std::vector<SampleRow> rows_of(const HybridTrajectory& traj, const py::object& times) {
  if (times.is_none()) return sample_uniform(traj, 1000);
  return sample(traj, times.cast<std::vector<double>>());
}

py::dict report_dict(const CheckReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["passed"] = r.passed;
  d["max_violation"] = r.max_violation;
  d["tolerance"] = r.tolerance;
  d["location"] = r.location;
  d["row"] = r.row;
  d["detail"] = r.detail;
  return d;
}

}  // namespace

PYBIND11_MODULE(_herglotz, m) {
  m.doc() = "Dissipative contact systems with impacts";

  py::register_exception<Error>(m, "HerglotzError", PyExc_RuntimeError);

  py::class_<HybridSystem>(m, "HybridSystem")
      .def_readonly("n", &HybridSystem::n)
      .def_property_readonly("formulation",
                             [](const HybridSystem& hs) { return to_string(hs.formulation); })
      .def_property_readonly("resolver",
                             [](const HybridSystem& hs) { return to_string(hs.resolver); })
      .def("h", [](const HybridSystem& hs, const Vec& q) { return hs.surface.h(q); })
      .def("grad_h", [](const HybridSystem& hs, const Vec& q) { return hs.surface.grad_h(q); })
      .def(
          "energy", [](const HybridSystem& hs, const Vec& y, double t) { return state_energy(hs, t, y); },
          py::arg("y"), py::arg("t") = 0.0, "E_L or H at a packed state [q, v, z]")
      .def(
          "velocity",
          [](const HybridSystem& hs, const Vec& y, double t) { return state_velocity(hs, t, y); },
          py::arg("y"), py::arg("t") = 0.0)
      .def(
          "rhs",
          [](const HybridSystem& hs, const Vec& y, double t) { return make_vector_field(hs)(t, y); },
          py::arg("y"), py::arg("t") = 0.0, "Vector field at a packed state");

  m.def(
      "circular_billiard",
      [](double radius, double gamma, double mass, const std::string& formulation) {
        return make_circular_billiard({Circle{radius}, gamma, mass}, parse_formulation(formulation));
      },
      py::arg("radius") = 1.0, py::arg("gamma") = 0.0, py::arg("mass") = 1.0,
      py::arg("formulation") = "lagrangian");
  m.def(
      "elliptical_billiard",
      [](double a, double b, double gamma, double mass, const std::string& formulation) {
        return make_elliptical_billiard({Ellipse{a, b}, gamma, mass}, parse_formulation(formulation));
      },
      py::arg("a"), py::arg("b"), py::arg("gamma") = 0.0, py::arg("mass") = 1.0,
      py::arg("formulation") = "lagrangian");

  py::class_<ImpactEvent>(m, "ImpactEvent")
      .def_readonly("index", &ImpactEvent::index)
      .def_readonly("t", &ImpactEvent::t)
      .def_readonly("q", &ImpactEvent::q)
      .def_readonly("state_minus", &ImpactEvent::state_minus)
      .def_readonly("state_plus", &ImpactEvent::state_plus)
      .def_readonly("lambda_", &ImpactEvent::lambda);

  py::class_<HybridTrajectory>(m, "Trajectory")
      .def_readonly("n", &HybridTrajectory::n)
      .def_readonly("t_start", &HybridTrajectory::t_start)
      .def_readonly("t_end", &HybridTrajectory::t_end)
      .def_readonly("events", &HybridTrajectory::events)
      .def_property_readonly("status",
                             [](const HybridTrajectory& t) { return to_string(t.status); })
      .def_readonly("status_message", &HybridTrajectory::status_message)
      .def(
          "sample",
          [](const HybridTrajectory& t, const py::object& times) {
            return sample_arrays(rows_of(t, times), t.n);
          },
          py::arg("times") = py::none(),
          "(t, y, flag) at the given times; both limits at an event time")
      .def(
          "sample_uniform",
          [](const HybridTrajectory& t, int count) { return sample_arrays(sample_uniform(t, count), t.n); },
          py::arg("count"));

  m.def(
      "simulate",
      [](const HybridSystem& hs, const Vec& q, const Vec& v, double z, double t_final, double rtol,
         double atol, double h_max, long max_events) {
        py::gil_scoped_release release;
        return run(hs, q, v, z, t_final, options(rtol, atol, h_max, max_events));
      },
      py::arg("system"), py::arg("q"), py::arg("v"), py::arg("z") = 0.0, py::arg("t_final"),
      py::arg("rtol") = 1e-10, py::arg("atol") = 1e-10, py::arg("h_max") = 0.1,
      py::arg("max_events") = 1'000'000,
      "Simulate from [q, v, z] at t = 0; v is qdot or p per the system's formulation");

  m.def(
      "resolve_impact",
      [](const HybridSystem& hs, const Vec& q, const Vec& v, double z, const std::string& method,
         double boundary_tol) {
        ImpactConfig cfg;
        cfg.boundary_tol = boundary_tol;
        if (hs.formulation == Formulation::Hamiltonian) {
          const auto r = resolve_impact_hamiltonian(*hs.hamiltonian, hs.surface,
                                                    ContactStateH{q, v, z, 0.0}, cfg);
          return py::make_tuple(r.state_plus.p, r.lambda, r.residuals.tangential, r.residuals.energy);
        }
        const auto r = method == "newton"
                           ? resolve_impact_newton(*hs.lagrangian, ContactStateL{q, v, z, 0.0},
                                                   hs.surface, cfg)
                           : resolve_impact_natural(*hs.lagrangian, ContactStateL{q, v, z, 0.0},
                                                    hs.surface, cfg);
        return py::make_tuple(r.state_plus.qdot, r.lambda, r.residuals.tangential,
                              r.residuals.energy);
      },
      py::arg("system"), py::arg("q"), py::arg("v"), py::arg("z") = 0.0,
      py::arg("method") = "natural", py::arg("boundary_tol") = 1e-12,
      "(v_plus, lambda, tangential_residual, energy_residual)");

  m.def(
      "free_particle",
      [](double gamma, const Vec& q0, const Vec& v0, double z0, double t, double mass) {
        const FreeParticleState s = free_particle_closed_form(gamma, q0, v0, z0, t, mass);
        return py::make_tuple(s.position, s.velocity, s.z);
      },
      py::arg("gamma"), py::arg("q0"), py::arg("v0"), py::arg("z0"), py::arg("t"),
      py::arg("mass") = 1.0, "Closed-form damped free flight: (q, qdot, z)");
  m.def(
      "circular_impact",
      [](double x, double y, double vx, double vy) {
        const PlanarVelocity v = circular_impact_closed_form(x, y, vx, vy);
        return py::make_tuple(v.vx, v.vy);
      },
      py::arg("x"), py::arg("y"), py::arg("vx"), py::arg("vy"));
  m.def(
      "elliptical_impact",
      [](double a, double b, double x, double y, double vx, double vy) {
        const PlanarVelocity v = elliptical_impact_closed_form(a, b, x, y, vx, vy);
        return py::make_tuple(v.vx, v.vy);
      },
      py::arg("a"), py::arg("b"), py::arg("x"), py::arg("y"), py::arg("vx"), py::arg("vy"));

  m.def(
      "check_energy_decay",
      [](const HybridTrajectory& traj, const HybridSystem& hs, int samples, double tol) {
        return report_dict(check_energy_decay(sample_uniform(traj, samples), hs, tol));
      },
      py::arg("trajectory"), py::arg("system"), py::arg("samples") = 2000,
      py::arg("tol") = kFlowTolerance);
  m.def(
      "check_impacts",
      [](const HybridTrajectory& traj, const HybridSystem& hs, double tol) {
        return report_dict(check_all_impacts(traj, hs, tol));
      },
      py::arg("trajectory"), py::arg("system"), py::arg("tol") = kImpactTolerance);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run_main(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a tool subcommand; returns (exit_code, stdout, stderr)");
}
