#include "herglotz/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "herglotz/diagnostics.hpp"
#include "herglotz/error.hpp"
#include "herglotz/systems.hpp"

namespace herglotz::cli {

namespace {

namespace fs = std::filesystem;

constexpr double kContainmentTol = 1e-10;
constexpr double kPolarTol = 1e-10;
constexpr double kStoredColumnTol = 1e-12;

void update(CheckReport& rep, double viol, double t, long row) {
  if (!(viol <= rep.max_violation)) {
    rep.max_violation = viol;
    rep.location = t;
    rep.row = row;
  }
}

CheckReport finish(CheckReport rep) {
  rep.passed = rep.max_violation <= rep.tolerance;
  return rep;
}

std::vector<SampleRow> samples_of(const std::vector<CsvRow>& rows) {
  std::vector<SampleRow> out;
  out.reserve(rows.size());
  for (const CsvRow& r : rows) out.push_back(r.sample);
  return out;
}

// Impact events reassembled from consecutive pre/post rows.
std::vector<std::pair<std::size_t, ImpactEvent>> row_events(const std::vector<CsvRow>& rows, int n) {
  std::vector<std::pair<std::size_t, ImpactEvent>> out;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    if (rows[k].sample.flag != SampleFlag::PreImpact ||
        rows[k + 1].sample.flag != SampleFlag::PostImpact) {
      continue;
    }
    ImpactEvent e;
    e.index = static_cast<int>(out.size());
    e.t = rows[k].sample.t;
    e.q = rows[k].sample.y.head(n);
    e.state_minus = rows[k].sample.y;
    e.state_plus = rows[k + 1].sample.y;
    out.emplace_back(k, std::move(e));
  }
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(3);
  os << x;
  return os.str();
}

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
  f << content;
  if (!f) throw Error(ErrorKind::ConfigError, "failed writing " + path.string());
}

Json event_json(const ImpactEvent& e, int n) {
  Json j;
  j["index"] = e.index;
  j["t"] = e.t;
  j["q"] = vec_json(e.q);
  j["v_minus"] = vec_json(e.v_minus(n));
  j["v_plus"] = vec_json(e.v_plus(n));
  j["z"] = e.z();
  j["lambda"] = e.lambda;
  j["residuals"] = {{"tangential", e.residuals.tangential}, {"energy", e.residuals.energy}};
  return j;
}

HybridTrajectory run(const HybridSystem& hs, const RunConfig& cfg) {
  const Vec y0 = initial_state(cfg);
  if (cfg.formulation == Formulation::Lagrangian) {
    return simulate(hs, unpack_lagrangian(cfg.n, 0.0, y0), cfg.t_final, cfg.options);
  }
  return simulate(hs, unpack_hamiltonian(cfg.n, 0.0, y0), cfg.t_final, cfg.options);
}

}  // namespace

std::vector<CheckReport> run_checks(const RunConfig& cfg, const HybridSystem& hs,
                                    const std::vector<CsvRow>& rows) {
  if (rows.empty()) throw Error(ErrorKind::InvalidSpec, "trajectory has no samples");
  const int n = hs.n;
  const std::vector<SampleRow> samples = samples_of(rows);
  const std::vector<CsvRow> fresh = tabulate(hs, samples);
  std::vector<CheckReport> out;

  // E and ell columns against values recomputed from the state columns.
  CheckReport stored;
  stored.name = "stored_columns";
  stored.tolerance = kStoredColumnTol;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double de = std::abs(rows[k].energy - fresh[k].energy) /
                      std::max(1.0, std::abs(fresh[k].energy));
    const double dl =
        std::abs(rows[k].ell - fresh[k].ell) / std::max(1.0, std::abs(fresh[k].ell));
    update(stored, std::isfinite(de + dl) ? std::max(de, dl)
                                          : std::numeric_limits<double>::infinity(),
           rows[k].sample.t, static_cast<long>(k));
  }
  stored = finish(stored);
  if (!stored.passed) stored.detail = "row " + std::to_string(stored.row) + " disagrees with its state";
  out.push_back(stored);

  out.push_back(check_energy_decay(samples, hs, cfg.flow_tol));

  const bool circle = cfg.kind == SystemKind::Circle;
  if (circle) {
    CheckReport ell = check_dissipated_quantity(
        samples,
        [&](const SampleRow& r) {
          const Vec v = state_velocity(hs, r.t, r.y);
          return r.y[0] * v[1] - r.y[1] * v[0];
        },
        hs, cfg.flow_tol);
    ell.name = "ell_decay";
    out.push_back(ell);
  }

  CheckReport impacts;
  impacts.name = "impact_conditions";
  impacts.tolerance = cfg.impact_tol;
  CheckReport polar;
  polar.name = "polar_relations";
  polar.tolerance = kPolarTol;
  const auto events = row_events(rows, n);
  for (const auto& [row, e] : events) {
    const CheckReport r = check_impact_conditions(e, hs, cfg.impact_tol);
    update(impacts, r.max_violation, e.t, static_cast<long>(row));
    if (circle) {
      const PolarRates before = polar_rates(e.q, state_velocity(hs, e.t, e.state_minus));
      const PolarRates after = polar_rates(e.q, state_velocity(hs, e.t, e.state_plus));
      update(polar,
             std::max(std::abs(after.r_dot + before.r_dot),
                      std::abs(after.theta_dot - before.theta_dot)),
             e.t, static_cast<long>(row));
    }
  }
  impacts = finish(impacts);
  impacts.detail = std::to_string(events.size()) + " impacts";
  out.push_back(impacts);
  if (circle) {
    polar = finish(polar);
    polar.detail = std::to_string(events.size()) + " impacts";
    out.push_back(polar);
  }

  CheckReport contain;
  contain.name = "containment";
  contain.tolerance = kContainmentTol;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double h = hs.surface.h(rows[k].sample.y.head(n));
    update(contain, std::isfinite(h) ? std::max(0.0, -h) : std::numeric_limits<double>::infinity(),
           rows[k].sample.t, static_cast<long>(k));
  }
  out.push_back(finish(contain));
  return out;
}

SimulateResult cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const HybridSystem hs = build_system(cfg);
  const HybridTrajectory traj = run(hs, cfg);
  const std::vector<CsvRow> rows = tabulate(hs, sample_uniform(traj, cfg.samples));
  const std::vector<CheckReport> checks = run_checks(cfg, hs, rows);

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const std::string csv_name = cfg.name + ".csv";
  const std::string json_name = cfg.name + ".json";
  const std::string svg_name = cfg.name + ".svg";

  std::ostringstream csv;
  write_csv(csv, cfg.n, rows);
  write_file(dir / csv_name, csv.str());
  if (cfg.svg) {
    std::ostringstream svg;
    write_svg(svg, cfg, rows);
    write_file(dir / svg_name, svg.str());
  }

  bool all_passed = true;
  Json checks_json = Json::array();
  for (const CheckReport& c : checks) {
    all_passed = all_passed && c.passed;
    checks_json.push_back(to_json(c));
  }
  const bool completed = traj.status == TerminalStatus::Completed;

  Json events = Json::array();
  for (const ImpactEvent& e : traj.events) events.push_back(event_json(e, cfg.n));

  Json s;
  s["config"] = cfg.source;
  s["system"] = to_string(cfg.kind);
  s["formulation"] = to_string(cfg.formulation);
  s["status"] = to_string(traj.status);
  if (!traj.status_message.empty()) s["status_message"] = traj.status_message;
  s["t_end"] = traj.t_end;
  s["impact_count"] = traj.events.size();
  s["energy"] = {{"initial", rows.front().energy},
                 {"final", rows.back().energy},
                 {"fitted_rate", fitted_decay_rate(rows)},
                 {"expected_rate", -cfg.gamma}};
  s["checks"] = checks_json;
  s["passed"] = completed && all_passed;
  s["events"] = events;
  Json files = {{"csv", csv_name}, {"summary", json_name}};
  if (cfg.svg) files["svg"] = svg_name;
  s["files"] = files;
  write_file(dir / json_name, s.dump(2) + "\n");

  log << cfg.name << ": " << to_string(traj.status) << ", " << traj.events.size()
      << " impacts, t_end=" << traj.t_end << "\n";
  for (const CheckReport& c : checks) {
    log << "  " << (c.passed ? "PASS " : "FAIL ") << c.name << " max=" << fmt(c.max_violation)
        << " tol=" << fmt(c.tolerance) << "\n";
  }
  if (!completed && !traj.status_message.empty()) log << "  " << traj.status_message << "\n";
  log << "  wrote " << (dir / csv_name).string() << "\n";

  return {completed && all_passed ? 0 : 2, std::move(s)};
}

int cmd_impact_test(const ImpactTestArgs& args, std::ostream& out, std::ostream& err) {
  if (args.q.size() != 2 || args.v.size() != 2) {
    err << "error: --q and --v take two comma-separated numbers\n";
    return 1;
  }
  BilliardSpec spec;
  if (args.geometry == "circle") {
    spec.boundary = Circle{args.radius};
  } else if (args.geometry == "ellipse") {
    spec.boundary = Ellipse{args.a, args.b};
  } else {
    err << "error: --geometry must be circle or ellipse\n";
    return 1;
  }
  spec.gamma = args.gamma;
  spec.mass = args.mass;

  try {
    spec.validate();
    const HybridSystem lag = make_billiard(spec, Formulation::Lagrangian);
    const HybridSystem ham = make_billiard(spec, Formulation::Hamiltonian);
    const Vec q = Eigen::Vector2d(args.q[0], args.q[1]);
    const Vec v = Eigen::Vector2d(args.v[0], args.v[1]);
    const ContactStateL s{q, v, 0.0, 0.0};
    ImpactConfig icfg;
    icfg.boundary_tol = 1e-9;

    const ImpactResultL nat = resolve_impact_natural(*lag.lagrangian, s, lag.surface, icfg);
    const ImpactResultL newton = resolve_impact_newton(*lag.lagrangian, s, lag.surface, icfg);
    const ImpactResultH hres = resolve_impact_hamiltonian(
        *ham.hamiltonian, ham.surface, ContactStateH{q, args.mass * v, 0.0, 0.0}, icfg);
    const Vec v_ham = hres.state_plus.p / args.mass;

    PlanarVelocity closed;
    if (const auto* c = std::get_if<Circle>(&spec.boundary)) {
      closed = circular_impact_closed_form(q[0] / c->radius, q[1] / c->radius, v[0], v[1]);
    } else {
      const auto& e = std::get<Ellipse>(spec.boundary);
      closed = elliptical_impact_closed_form(e.a, e.b, q[0], q[1], v[0], v[1]);
    }
    const Vec v_closed = Eigen::Vector2d(closed.vx, closed.vy);

    auto line = [&](const char* label, const Vec& w) {
      out << label << format_double(w[0]) << " " << format_double(w[1]) << "\n";
    };
    line("pre-impact velocity:   ", v);
    line("natural resolver:      ", nat.state_plus.qdot);
    line("newton resolver:       ", newton.state_plus.qdot);
    line("hamiltonian resolver:  ", v_ham);
    line("closed form:           ", v_closed);
    const double diff = std::max({(nat.state_plus.qdot - v_closed).cwiseAbs().maxCoeff(),
                                  (newton.state_plus.qdot - v_closed).cwiseAbs().maxCoeff(),
                                  (v_ham - v_closed).cwiseAbs().maxCoeff()});
    out << "max difference:        " << format_double(diff) << "\n";
    out << "residuals (natural):   tangential=" << format_double(nat.residuals.tangential)
        << " energy=" << format_double(nat.residuals.energy) << "\n";
    const double tol = 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff());
    if (!(diff <= tol)) {
      out << "resolvers disagree with the closed form beyond " << format_double(tol) << "\n";
      return 2;
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::GrazingContact ? 2 : 1;
  }
}

int cmd_check(const fs::path& csv, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(csv);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot read " + csv.string());
    const std::vector<CsvRow> rows = read_csv(in, cfg.n);
    if (rows.empty()) throw Error(ErrorKind::SchemaMismatch, csv.string() + ": no samples");
    const HybridSystem hs = build_system(cfg);
    const std::vector<CheckReport> checks = run_checks(cfg, hs, rows);
    bool passed = true;
    Json report;
    report["csv"] = csv.string();
    report["rows"] = rows.size();
    Json arr = Json::array();
    for (const CheckReport& c : checks) {
      passed = passed && c.passed;
      arr.push_back(to_json(c));
    }
    report["checks"] = arr;
    report["passed"] = passed;
    out << report.dump(2) << "\n";
    return passed ? 0 : 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_sweep(const Json& doc, const std::optional<std::string>& out_dir, int jobs,
              std::ostream& out, std::ostream& err) {
  const auto fail = [&](const std::string& msg) {
    err << "error: ConfigError: " << msg << "\n";
    return 1;
  };
  if (!doc.is_object() || !doc.contains("sweep") || !doc["sweep"].is_object()) {
    return fail("sweep: missing section");
  }
  const Json& sw = doc["sweep"];
  if (!sw.contains("parameter") || !sw["parameter"].is_string()) {
    return fail("sweep.parameter: must be a JSON pointer string");
  }
  if (!sw.contains("values") || !sw["values"].is_array() || sw["values"].empty()) {
    return fail("sweep.values: must be a non-empty array");
  }
  const std::string pointer = sw["parameter"].get<std::string>();
  Json::json_pointer ptr;
  try {
    ptr = Json::json_pointer(pointer);
  } catch (const std::exception& e) {
    return fail("sweep.parameter: " + std::string(e.what()));
  }
  const Json values = sw["values"];

  // Parse every run up front so config errors surface before any work.
  std::vector<RunConfig> runs;
  std::string base_dir;
  try {
    for (std::size_t i = 0; i < values.size(); ++i) {
      Json d = doc;
      d.erase("sweep");
      d[ptr] = values[i];
      RunConfig cfg = parse_config(d);
      if (out_dir) cfg.out_dir = *out_dir;
      cfg.name += "_" + std::to_string(i);
      runs.push_back(std::move(cfg));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  base_dir = runs.front().out_dir;

  std::vector<Json> results(runs.size());
  std::vector<int> codes(runs.size(), 1);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      std::ostringstream log;
      Json r;
      r["value"] = values[i];
      try {
        SimulateResult res = cmd_simulate(runs[i], log);
        codes[i] = res.exit_code;
        r["exit_code"] = res.exit_code;
        r["summary"] = std::move(res.summary);
      } catch (const std::exception& e) {
        codes[i] = 1;
        r["exit_code"] = 1;
        r["error"] = e.what();
        log << runs[i].name << ": error: " << e.what() << "\n";
      }
      results[i] = std::move(r);
      std::lock_guard lock(log_mutex);
      out << log.str();
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < workers; ++k) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  Json merged;
  merged["parameter"] = pointer;
  merged["runs"] = Json(results);
  fs::create_directories(base_dir);
  write_file(fs::path(base_dir) / "sweep.json", merged.dump(2) + "\n");

  if (std::find(codes.begin(), codes.end(), 1) != codes.end()) return 1;
  if (std::find(codes.begin(), codes.end(), 2) != codes.end()) return 2;
  return 0;
}

namespace {

std::vector<double> parse_pair(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument(item);
  }
  return out;
}

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<int> samples;
  std::optional<bool> svg;
  std::optional<std::string> formulation;

  void attach(CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--samples", samples, "Uniform sample count")->check(CLI::PositiveNumber);
    cmd->add_flag("--svg,!--no-svg", svg, "Write an SVG plot");
    cmd->add_option("--formulation", formulation, "lagrangian or hamiltonian")
        ->check(CLI::IsMember({"lagrangian", "hamiltonian"}));
  }

  void apply(Json& doc) const {
    if (!doc.is_object()) return;
    if (out_dir) doc["output"]["dir"] = *out_dir;
    if (samples) doc["output"]["samples"] = *samples;
    if (svg) doc["output"]["svg"] = *svg;
    if (formulation) {
      doc["formulation"] = *formulation;
      // Resolver choices are formulation specific; let the default follow.
      if (doc.contains("resolver")) doc.erase("resolver");
    }
  }
};

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  // Reuse the diagnostics of the config parser for syntax errors.
  try {
    return Json::parse(ss.str());
  } catch (const Json::parse_error&) {
    parse_config_text(ss.str(), path);
  }
  throw Error(ErrorKind::ConfigError, path + ": invalid JSON");
}

RunConfig load_with(const std::string& path, const Overrides& o) {
  Json doc = read_json(path);
  o.apply(doc);
  return parse_config(doc);
}

}  // namespace

int run_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulate dissipative contact systems with impacts"};
  app.require_subcommand(1);

  std::string config;
  Overrides sim_o, check_o, sweep_o;

  CLI::App* sim = app.add_subcommand("simulate", "Run a configured simulation");
  sim->add_option("--config", config, "Config file (JSON)")->required();
  sim_o.attach(sim);

  ImpactTestArgs it;
  std::string q_text, v_text;
  CLI::App* imp = app.add_subcommand("impact-test", "Resolve one boundary impact");
  imp->add_option("--geometry", it.geometry, "circle or ellipse")
      ->check(CLI::IsMember({"circle", "ellipse"}));
  imp->add_option("--radius", it.radius, "Circle radius");
  imp->add_option("--a", it.a, "Ellipse semi-axis along x");
  imp->add_option("--b", it.b, "Ellipse semi-axis along y");
  imp->add_option("--q", q_text, "Boundary point x,y")->required();
  imp->add_option("--v", v_text, "Pre-impact velocity vx,vy")->required();
  imp->add_option("--gamma", it.gamma, "Damping coefficient");
  imp->add_option("--mass", it.mass, "Particle mass");

  std::string csv;
  CLI::App* chk = app.add_subcommand("check", "Re-run diagnostics on a trajectory CSV");
  chk->add_option("csv", csv, "Trajectory CSV")->required();
  chk->add_option("--config", config, "Config used to produce the CSV")->required();
  check_o.attach(chk);

  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  CLI::App* swp = app.add_subcommand("sweep", "Run a config over a list of parameter values");
  swp->add_option("--config", config, "Config file with a sweep section")->required();
  swp->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep_o.attach(swp);

  std::vector<std::string> argv_store{"herglotz"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      return cmd_simulate(load_with(config, sim_o), out).exit_code;
    }
    if (*imp) {
      try {
        it.q = parse_pair(q_text);
        it.v = parse_pair(v_text);
      } catch (const std::exception&) {
        err << "error: --q and --v take two comma-separated numbers\n";
        return 1;
      }
      return cmd_impact_test(it, out, err);
    }
    if (*chk) {
      return cmd_check(csv, load_with(config, check_o), out, err);
    }
    if (*swp) {
      Json doc = read_json(config);
      sweep_o.apply(doc);
      return cmd_sweep(doc, sweep_o.out_dir, jobs, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_main(args, std::cout, std::cerr);
}

}  // namespace herglotz::cli
