#include "herglotz/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "herglotz/systems.hpp"

namespace herglotz::cli {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw Error(ErrorKind::ConfigError, field + ": " + msg);
}

const Json* find(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const Json& obj, const char* key, const std::string& path,
              std::optional<double> fallback = std::nullopt) {
  const Json* v = find(obj, key);
  const std::string field = path + "." + key;
  if (!v) {
    if (fallback) return *fallback;
    fail(field, "is required");
  }
  if (!v->is_number()) fail(field, "must be a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) fail(field, "must be finite");
  return x;
}

double positive(const Json& obj, const char* key, const std::string& path,
                std::optional<double> fallback = std::nullopt) {
  const double x = number(obj, key, path, fallback);
  if (!(x > 0.0)) fail(path + "." + key, "must be > 0");
  return x;
}

Vec vector(const Json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) fail(field, "must be a non-empty array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(field + "[" + std::to_string(i) + "]", "must be a number");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    if (!std::isfinite(out[static_cast<Eigen::Index>(i)])) {
      fail(field + "[" + std::to_string(i) + "]", "must be finite");
    }
  }
  return out;
}

Mat matrix(const Json& v, int n, const std::string& field) {
  if (!v.is_array() || static_cast<int>(v.size()) != n) {
    fail(field, "must be an array of " + std::to_string(n) + " rows");
  }
  Mat out(n, n);
  for (int i = 0; i < n; ++i) {
    const Vec row = vector(v[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
    if (row.size() != n) fail(field + "[" + std::to_string(i) + "]", "row has the wrong length");
    out.row(i) = row.transpose();
  }
  return out;
}

const Json& section(const Json& doc, const char* key) {
  const Json* s = find(doc, key);
  if (!s) fail(key, "section is required");
  if (!s->is_object()) fail(key, "must be an object");
  return *s;
}

void parse_system(const Json& sys, RunConfig& cfg) {
  const Json* kind = find(sys, "kind");
  if (!kind || !kind->is_string()) fail("system.kind", "must be one of circle, ellipse, natural");
  const std::string k = kind->get<std::string>();
  cfg.gamma = number(sys, "gamma", "system", 0.0);
  if (cfg.gamma < 0.0) fail("system.gamma", "must be >= 0");
  if (k == "circle") {
    cfg.kind = SystemKind::Circle;
    cfg.radius = positive(sys, "radius", "system", 1.0);
    cfg.mass = positive(sys, "mass", "system", 1.0);
    cfg.n = 2;
  } else if (k == "ellipse") {
    cfg.kind = SystemKind::Ellipse;
    cfg.a = positive(sys, "a", "system");
    cfg.b = positive(sys, "b", "system");
    cfg.mass = positive(sys, "mass", "system", 1.0);
    cfg.n = 2;
  } else if (k == "natural") {
    cfg.kind = SystemKind::Natural;
    const Json* axes = find(sys, "semi_axes");
    if (!axes) fail("system.semi_axes", "is required for a natural system");
    cfg.semi_axes = vector(*axes, "system.semi_axes");
    cfg.n = static_cast<int>(cfg.semi_axes.size());
    for (int i = 0; i < cfg.n; ++i) {
      if (!(cfg.semi_axes[i] > 0.0)) {
        fail("system.semi_axes[" + std::to_string(i) + "]", "must be > 0");
      }
    }
    const Json* m = find(sys, "mass_matrix");
    cfg.mass_matrix = m ? matrix(*m, cfg.n, "system.mass_matrix") : Mat(Mat::Identity(cfg.n, cfg.n));
    const Json* kmat = find(sys, "stiffness");
    cfg.stiffness = kmat ? matrix(*kmat, cfg.n, "system.stiffness") : Mat(Mat::Zero(cfg.n, cfg.n));
    if (!cfg.mass_matrix.isApprox(cfg.mass_matrix.transpose())) {
      fail("system.mass_matrix", "must be symmetric");
    }
    if (Eigen::LLT<Mat>(cfg.mass_matrix).info() != Eigen::Success) {
      fail("system.mass_matrix", "must be positive definite");
    }
  } else {
    fail("system.kind", "unknown kind '" + k + "' (expected circle, ellipse or natural)");
  }
}

void parse_initial(const Json& init, RunConfig& cfg) {
  const Json* q = find(init, "q");
  if (!q) fail("initial.q", "is required");
  cfg.q0 = vector(*q, "initial.q");
  if (cfg.q0.size() != cfg.n) fail("initial.q", "must have length " + std::to_string(cfg.n));
  const Json* v = find(init, "qdot");
  const Json* p = find(init, "p");
  if ((v != nullptr) == (p != nullptr)) fail("initial", "give exactly one of qdot or p");
  if (v) {
    cfg.qdot0 = vector(*v, "initial.qdot");
    if (cfg.qdot0->size() != cfg.n) {
      fail("initial.qdot", "must have length " + std::to_string(cfg.n));
    }
  } else {
    cfg.p0 = vector(*p, "initial.p");
    if (cfg.p0->size() != cfg.n) fail("initial.p", "must have length " + std::to_string(cfg.n));
  }
  cfg.z0 = number(init, "z", "initial", 0.0);
}

ResolverKind parse_resolver(const std::string& s) {
  if (s == "natural") return ResolverKind::Natural;
  if (s == "newton") return ResolverKind::Newton;
  if (s == "hamiltonian") return ResolverKind::Hamiltonian;
  fail("resolver", "unknown resolver '" + s + "'");
}

NaturalForm natural_form(const RunConfig& cfg) {
  if (cfg.kind != SystemKind::Natural) {
    BilliardSpec spec;
    if (cfg.kind == SystemKind::Circle) {
      spec.boundary = Circle{cfg.radius};
    } else {
      spec.boundary = Ellipse{cfg.a, cfg.b};
    }
    spec.gamma = cfg.gamma;
    spec.mass = cfg.mass;
    return billiard_natural_form(spec);
  }
  const Mat m = cfg.mass_matrix;
  const Mat k = cfg.stiffness;
  const int n = cfg.n;
  NaturalForm form;
  form.mass = [m](const Vec&) { return m; };
  form.mass_gradient = [n](const Vec&) { return std::vector<Mat>(n, Mat::Zero(n, n)); };
  form.potential = [k](const Vec& q) { return 0.5 * q.dot(k * q); };
  form.potential_gradient = [k](const Vec& q) { return Vec(0.5 * (k + k.transpose()) * q); };
  form.gamma = cfg.gamma;
  return form;
}

}  // namespace

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::Circle: return "circle";
    case SystemKind::Ellipse: return "ellipse";
    case SystemKind::Natural: return "natural";
  }
  return "unknown";
}

RunConfig parse_config(const Json& doc) {
  if (!doc.is_object()) fail("<root>", "config must be a JSON object");
  RunConfig cfg;
  cfg.source = doc;
  parse_system(section(doc, "system"), cfg);
  parse_initial(section(doc, "initial"), cfg);
  cfg.t_final = positive(doc, "t_final", "<root>");

  if (const Json* f = find(doc, "formulation")) {
    if (!f->is_string()) fail("formulation", "must be a string");
    const std::string s = f->get<std::string>();
    if (s == "lagrangian") {
      cfg.formulation = Formulation::Lagrangian;
    } else if (s == "hamiltonian") {
      cfg.formulation = Formulation::Hamiltonian;
    } else {
      fail("formulation", "must be lagrangian or hamiltonian");
    }
  }
  if (const Json* r = find(doc, "resolver")) {
    if (!r->is_string()) fail("resolver", "must be a string");
    cfg.resolver = parse_resolver(r->get<std::string>());
  }

  if (const Json* st = find(doc, "stepper")) {
    if (!st->is_object()) fail("stepper", "must be an object");
    auto& s = cfg.options.stepper;
    s.rtol = positive(*st, "rtol", "stepper", s.rtol);
    s.atol = positive(*st, "atol", "stepper", s.atol);
    s.h_init = positive(*st, "h_init", "stepper", s.h_init);
    s.h_max = positive(*st, "h_max", "stepper", s.h_max);
    s.max_steps = static_cast<long>(positive(*st, "max_steps", "stepper",
                                             static_cast<double>(s.max_steps)));
  }
  if (const Json* ev = find(doc, "events")) {
    if (!ev->is_object()) fail("events", "must be an object");
    auto& e = cfg.options.events;
    e.t_tol = positive(*ev, "t_tol", "events", e.t_tol);
    e.h_tol = positive(*ev, "h_tol", "events", e.h_tol);
    e.grazing_threshold = positive(*ev, "grazing_threshold", "events", e.grazing_threshold);
    e.h_arm = positive(*ev, "h_arm", "events", e.h_arm);
    cfg.options.max_events = static_cast<long>(
        positive(*ev, "max_events", "events", static_cast<double>(cfg.options.max_events)));
    cfg.options.zeno_run = static_cast<int>(
        positive(*ev, "zeno_run", "events", static_cast<double>(cfg.options.zeno_run)));
    cfg.options.zeno_window_factor =
        positive(*ev, "zeno_window_factor", "events", cfg.options.zeno_window_factor);
  }
  if (const Json* out = find(doc, "output")) {
    if (!out->is_object()) fail("output", "must be an object");
    if (const Json* d = find(*out, "dir")) {
      if (!d->is_string()) fail("output.dir", "must be a string");
      cfg.out_dir = d->get<std::string>();
    }
    if (const Json* nm = find(*out, "name")) {
      if (!nm->is_string() || nm->get<std::string>().empty()) {
        fail("output.name", "must be a non-empty string");
      }
      cfg.name = nm->get<std::string>();
    }
    const double samples = number(*out, "samples", "output", cfg.samples);
    if (samples < 2 || samples != std::floor(samples)) {
      fail("output.samples", "must be an integer >= 2");
    }
    cfg.samples = static_cast<int>(samples);
    if (const Json* svg = find(*out, "svg")) {
      if (!svg->is_boolean()) fail("output.svg", "must be true or false");
      cfg.svg = svg->get<bool>();
    }
  }
  if (const Json* ch = find(doc, "checks")) {
    if (!ch->is_object()) fail("checks", "must be an object");
    cfg.flow_tol = positive(*ch, "flow_tol", "checks", cfg.flow_tol);
    cfg.impact_tol = positive(*ch, "impact_tol", "checks", cfg.impact_tol);
  }

  // Interior check on the initial point.
  const HybridSystem hs = build_system(cfg);
  const double g = hs.surface.h(cfg.q0);
  if (!(g > 0.0)) fail("initial.q", "must lie strictly inside the boundary");
  return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Translate the byte offset into line and column.
    const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorKind::ConfigError, origin + ":" + std::to_string(line) + ":" +
                                            std::to_string(col) + ": JSON syntax error");
  }
  return parse_config(doc);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

HybridSystem build_system(const RunConfig& cfg) {
  const NaturalForm form = natural_form(cfg);
  HybridSystem hs;
  hs.n = cfg.n;
  hs.formulation = cfg.formulation;
  if (cfg.kind == SystemKind::Natural) {
    const Vec inv2 = cfg.semi_axes.cwiseInverse().cwiseAbs2();
    hs.surface.h = [inv2](const Vec& q) { return 1.0 - q.cwiseAbs2().dot(inv2); };
    hs.surface.grad_h = [inv2](const Vec& q) { return Vec(-2.0 * q.cwiseProduct(inv2)); };
  } else {
    BilliardSpec spec;
    if (cfg.kind == SystemKind::Circle) {
      spec.boundary = Circle{cfg.radius};
    } else {
      spec.boundary = Ellipse{cfg.a, cfg.b};
    }
    spec.gamma = cfg.gamma;
    spec.mass = cfg.mass;
    hs.surface = billiard_surface(spec);
  }
  if (cfg.formulation == Formulation::Lagrangian) {
    hs.lagrangian = make_natural_system(cfg.n, form);
    hs.resolver = cfg.resolver.value_or(ResolverKind::Natural);
  } else {
    hs.hamiltonian = make_natural_hamiltonian(cfg.n, form);
    hs.resolver = cfg.resolver.value_or(ResolverKind::Hamiltonian);
  }
  try {
    hs.validate();
  } catch (const Error& e) {
    fail("resolver", e.message());
  }
  return hs;
}

Vec initial_state(const RunConfig& cfg) {
  const SystemSpec lag = make_natural_system(cfg.n, natural_form(cfg));
  if (cfg.formulation == Formulation::Lagrangian) {
    Vec v = cfg.qdot0 ? *cfg.qdot0
                      : legendre_inverse(lag, ContactStateH{cfg.q0, *cfg.p0, cfg.z0, 0.0}).qdot;
    return pack(ContactStateL{cfg.q0, v, cfg.z0, 0.0});
  }
  Vec p = cfg.p0 ? *cfg.p0
                 : legendre_forward(lag, ContactStateL{cfg.q0, *cfg.qdot0, cfg.z0, 0.0}).p;
  return pack(ContactStateH{cfg.q0, p, cfg.z0, 0.0});
}

}  // namespace herglotz::cli
