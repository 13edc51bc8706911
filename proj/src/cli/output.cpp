#include "herglotz/cli/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "herglotz/error.hpp"

namespace herglotz::cli {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_field(const std::string& s, long line, const std::string& column) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size()) {
    throw Error(ErrorKind::SchemaMismatch, "line " + std::to_string(line) + ", column " + column +
                                               ": not a number: '" + s + "'");
  }
  return v;
}

struct Box {
  double x_min, x_max, y_min, y_max;
};

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> csv_header(int n) {
  std::vector<std::string> h{"t"};
  for (int i = 1; i <= n; ++i) h.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) h.push_back("v" + std::to_string(i));
  for (const char* c : {"z", "E", "ell", "event_flag"}) h.emplace_back(c);
  return h;
}

std::vector<CsvRow> tabulate(const HybridSystem& hs, const std::vector<SampleRow>& rows) {
  std::vector<CsvRow> out;
  out.reserve(rows.size());
  for (const SampleRow& r : rows) {
    CsvRow c;
    c.sample = r;
    c.energy = state_energy(hs, r.t, r.y);
    if (hs.n >= 2) {
      const Vec v = state_velocity(hs, r.t, r.y);
      c.ell = r.y[0] * v[1] - r.y[1] * v[0];
    }
    out.push_back(std::move(c));
  }
  return out;
}

void write_csv(std::ostream& out, int n, const std::vector<CsvRow>& rows) {
  const auto header = csv_header(n);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const CsvRow& r : rows) {
    out << format_double(r.sample.t);
    for (Eigen::Index i = 0; i < r.sample.y.size(); ++i) out << ',' << format_double(r.sample.y[i]);
    out << ',' << format_double(r.energy) << ',' << format_double(r.ell) << ','
        << static_cast<int>(r.sample.flag) << '\n';
  }
}

std::vector<CsvRow> read_csv(std::istream& in, int n) {
  const auto header = csv_header(n);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaMismatch, "empty file: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto got = split(line, ',');
  if (got != header) {
    std::string want;
    for (std::size_t i = 0; i < header.size(); ++i) want += (i ? "," : "") + header[i];
    throw Error(ErrorKind::SchemaMismatch, "line 1: expected header '" + want + "'");
  }

  std::vector<CsvRow> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != header.size()) {
      throw Error(ErrorKind::SchemaMismatch, "line " + std::to_string(lineno) + ": expected " +
                                                 std::to_string(header.size()) + " fields, got " +
                                                 std::to_string(f.size()));
    }
    CsvRow r;
    r.sample.t = parse_field(f[0], lineno, header[0]);
    r.sample.y.resize(2 * n + 1);
    for (int i = 0; i < 2 * n + 1; ++i) {
      r.sample.y[i] = parse_field(f[static_cast<std::size_t>(i + 1)], lineno,
                                  header[static_cast<std::size_t>(i + 1)]);
    }
    r.energy = parse_field(f[header.size() - 3], lineno, "E");
    r.ell = parse_field(f[header.size() - 2], lineno, "ell");
    const std::string& flag = f.back();
    if (flag != "0" && flag != "1" && flag != "2") {
      throw Error(ErrorKind::SchemaMismatch,
                  "line " + std::to_string(lineno) + ", column event_flag: expected 0, 1 or 2");
    }
    r.sample.flag = static_cast<SampleFlag>(flag[0] - '0');
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_svg(std::ostream& out, const RunConfig& cfg, const std::vector<CsvRow>& rows) {
  constexpr double kSize = 800.0;
  constexpr double kMargin = 40.0;

  // Boundary outline in model coordinates; empty when n < 2.
  std::vector<std::pair<double, double>> outline;
  double ax = 0.0, ay = 0.0;
  switch (cfg.kind) {
    case SystemKind::Circle: ax = ay = cfg.radius; break;
    case SystemKind::Ellipse: ax = cfg.a; ay = cfg.b; break;
    case SystemKind::Natural:
      if (cfg.n >= 2) {
        ax = cfg.semi_axes[0];
        ay = cfg.semi_axes[1];
      }
      break;
  }
  const bool planar = cfg.n >= 2;
  if (planar) {
    constexpr int kPoints = 360;
    for (int k = 0; k <= kPoints; ++k) {
      const double th = 2.0 * std::numbers::pi * k / kPoints;
      outline.emplace_back(ax * std::cos(th), ay * std::sin(th));
    }
  }

  std::vector<std::pair<double, double>> path;
  for (const CsvRow& r : rows) {
    if (planar) {
      path.emplace_back(r.sample.y[0], r.sample.y[1]);
    } else {
      path.emplace_back(r.sample.t, r.sample.y[0]);
    }
  }

  Box box{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  auto extend = [&](const std::pair<double, double>& p) {
    if (!std::isfinite(p.first) || !std::isfinite(p.second)) return;
    box.x_min = std::min(box.x_min, p.first);
    box.x_max = std::max(box.x_max, p.first);
    box.y_min = std::min(box.y_min, p.second);
    box.y_max = std::max(box.y_max, p.second);
  };
  for (const auto& p : outline) extend(p);
  for (const auto& p : path) extend(p);
  if (!(box.x_min <= box.x_max)) box = {-1.0, 1.0, -1.0, 1.0};
  const double span = std::max({box.x_max - box.x_min, box.y_max - box.y_min, 1e-300});
  const double scale = (kSize - 2.0 * kMargin) / span;
  const double cx = 0.5 * (box.x_min + box.x_max);
  const double cy = 0.5 * (box.y_min + box.y_max);
  auto coord = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  auto px = [&](double x) { return coord(0.5 * kSize + (x - cx) * scale); };
  auto py = [&](double y) { return coord(0.5 * kSize - (y - cy) * scale); };
  auto points = [&](const std::vector<std::pair<double, double>>& pts) {
    std::string s;
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!s.empty()) s += ' ';
      s += px(x) + "," + py(y);
    }
    return s;
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
         "viewBox=\"0 0 800 800\">\n";
  out << "<title>" << cfg.name << "</title>\n";
  out << "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
  if (!outline.empty()) {
    out << "<polyline id=\"boundary\" fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\""
        << points(outline) << "\"/>\n";
  }
  out << "<polyline id=\"trajectory\" fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"0.8\" "
         "points=\""
      << points(path) << "\"/>\n";
  out << "</svg>\n";
}

Json to_json(const CheckReport& r) {
  Json j;
  j["name"] = r.name;
  j["passed"] = r.passed;
  j["max_violation"] = r.max_violation;
  j["tolerance"] = r.tolerance;
  j["location_t"] = r.location;
  j["row"] = r.row;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j;
}

double fitted_decay_rate(const std::vector<CsvRow>& rows) {
  double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
  long count = 0;
  for (const CsvRow& r : rows) {
    if (r.sample.flag != SampleFlag::Flow || !(r.energy > 0.0)) continue;
    const double l = std::log(r.energy);
    st += r.sample.t;
    sl += l;
    stt += r.sample.t * r.sample.t;
    stl += r.sample.t * l;
    ++count;
  }
  if (count < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = count * stt - st * st;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (count * stl - st * sl) / denom;
}

}  // namespace herglotz::cli
