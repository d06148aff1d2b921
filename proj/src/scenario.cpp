#include "smallscat/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "smallscat/acoustic_discrete.hpp"

namespace smallscat {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kPi = std::numbers::pi;

// ---- strict JSON helpers ---------------------------------------------------

void expect_keys(const json& j, const std::string& path,
                 std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw Error::validation("config: '" + path + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw Error::validation("config: unknown key '" + path + "." + it.key() +
                              "'");
  }
}

double get_number(const json& j, const std::string& path, const char* key,
                  std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw Error::validation("config: missing '" + path + "." + key + "'");
  }
  const json& v = j.at(key);
  if (!v.is_number())
    throw Error::validation("config: '" + path + "." + key +
                            "' must be a number");
  return v.get<double>();
}

long get_integer(const json& j, const std::string& path, const char* key,
                 std::optional<long> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw Error::validation("config: missing '" + path + "." + key + "'");
  }
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw Error::validation("config: '" + path + "." + key +
                            "' must be an integer");
  return v.get<long>();
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       std::optional<std::string> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw Error::validation("config: missing '" + path + "." + key + "'");
  }
  const json& v = j.at(key);
  if (!v.is_string())
    throw Error::validation("config: '" + path + "." + key +
                            "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const json& j, const std::string& path, const char* key,
              bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean())
    throw Error::validation("config: '" + path + "." + key +
                            "' must be a boolean");
  return v.get<bool>();
}

Vec3 get_vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3)
    throw Error::validation("config: '" + where + "' must be [x, y, z]");
  for (const auto& c : v)
    if (!c.is_number())
      throw Error::validation("config: '" + where + "' must hold numbers");
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat3_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

json cvec_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error::io(path + ": cannot open for writing");
  out << text;
  if (!out) throw Error::io(path + ": write failed");
}

void write_json(const std::string& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

}  // namespace

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

DensityFn DensitySpec::make(const Box& region) const {
  if (kind == "uniform") {
    const double a = amplitude;
    return [a](const Vec3&) { return a; };
  }
  if (kind == "sin2-bump") {
    const double a = amplitude;
    const Vec3 lo = region.lo, ext = region.extent();
    return [a, lo, ext](const Vec3& p) {
      double w = a;
      for (int ax = 0; ax < 3; ++ax) {
        const double s = std::sin(kPi * (p[ax] - lo[ax]) / ext[ax]);
        w *= s * s;
      }
      return w;
    };
  }
  if (kind == "gaussian") {
    const double a = amplitude, wdt = width;
    const Vec3 c = center;
    return [a, wdt, c](const Vec3& p) {
      return a * std::exp(-(p - c).squaredNorm() / (2.0 * wdt * wdt));
    };
  }
  throw Error::validation("config: unknown density kind '" + kind + "'");
}

ContinuumOptions Scenario::continuum_options() const {
  ContinuumOptions o;
  o.tolerance = solver_tolerance;
  o.dense_limit = dense_limit;
  o.solver = solver;
  return o;
}

namespace {

const std::vector<std::string> kModes = {
    "polarizability", "acoustic-discrete", "acoustic-continuum",
    "em-discrete",    "em-continuum",      "compare"};

bool is_solver_mode(const std::string& mode) {
  return mode == "acoustic-discrete" || mode == "acoustic-continuum" ||
         mode == "em-discrete" || mode == "em-continuum";
}

bool is_em_mode(const std::string& mode) {
  return mode == "em-discrete" || mode == "em-continuum";
}

Scenario parse_scenario_json(const json& doc, const std::string& name) {
  Scenario s;
  expect_keys(doc, name,
              {"mode", "body", "physics", "ensemble", "numerics", "output",
               "compare"});
  s.mode = get_string(doc, name, "mode");
  bool known_mode = false;
  for (const auto& m : kModes) known_mode = known_mode || m == s.mode;
  if (!known_mode)
    throw Error::validation("config: unknown mode '" + s.mode + "'");

  if (doc.contains("body")) {
    const json& b = doc.at("body");
    expect_keys(b, "body", {"shape", "radius", "semiaxes", "path", "refinement"});
    s.body_shape = get_string(b, "body", "shape", std::string("sphere"));
    if (s.body_shape != "sphere" && s.body_shape != "ellipsoid" &&
        s.body_shape != "mesh")
      throw Error::validation("config: body.shape must be sphere, ellipsoid or "
                              "mesh");
    s.body_radius = get_number(b, "body", "radius", 1.0);
    if (b.contains("semiaxes")) s.body_semiaxes = get_vec3(b["semiaxes"], "body.semiaxes");
    s.body_mesh_path = get_string(b, "body", "path", std::string());
    s.body_refinement = static_cast<int>(get_integer(b, "body", "refinement", 3));
    if (s.body_shape == "sphere" && !(s.body_radius > 0.0))
      throw Error::validation("config: body.radius must be > 0");
    if (s.body_shape == "ellipsoid" &&
        !(s.body_semiaxes.x() > 0 && s.body_semiaxes.y() > 0 &&
          s.body_semiaxes.z() > 0))
      throw Error::validation("config: body.semiaxes must be > 0");
    if (s.body_shape == "mesh" && s.body_mesh_path.empty())
      throw Error::validation("config: body.path required for mesh bodies");
    if (s.body_refinement < 0 || s.body_refinement > 7)
      throw Error::validation("config: body.refinement must be in 0..7");
  } else if (s.mode == "polarizability" || is_solver_mode(s.mode)) {
    throw Error::validation("config: mode '" + s.mode + "' needs a body section");
  }

  if (doc.contains("physics")) {
    const json& p = doc.at("physics");
    expect_keys(p, "physics",
                {"k", "incident_direction", "polarization", "boundary",
                 "impedance_h", "gamma", "gamma_tilde", "eps0", "mu0"});
    s.k = get_number(p, "physics", "k", 1.0);
    if (p.contains("incident_direction"))
      s.incident = get_vec3(p["incident_direction"], "physics.incident_direction");
    if (p.contains("polarization"))
      s.polarization = get_vec3(p["polarization"], "physics.polarization");
    if (p.contains("boundary"))
      s.boundary = boundary_from_string(
          get_string(p, "physics", "boundary", std::string("dirichlet")));
    s.impedance_h = get_number(p, "physics", "impedance_h", 1.0);
    s.gamma = get_number(p, "physics", "gamma", 0.5);
    s.gamma_tilde = get_number(p, "physics", "gamma_tilde", 0.0);
    s.constants.eps0 = get_number(p, "physics", "eps0", 1.0);
    s.constants.mu0 = get_number(p, "physics", "mu0", 1.0);
  }
  if (is_solver_mode(s.mode) || s.mode == "compare") {
    if (!(s.k > 0.0)) throw Error::validation("config: physics.k must be > 0");
    if (s.incident.norm() == 0.0)
      throw Error::validation("config: physics.incident_direction must be nonzero");
    s.incident.normalize();
  }
  if (!(s.gamma >= -1.0 && s.gamma < 1.0))
    throw Error::validation("config: physics.gamma must lie in [-1, 1)");
  if (!(s.gamma_tilde >= -1.0 && s.gamma_tilde < 1.0))
    throw Error::validation("config: physics.gamma_tilde must lie in [-1, 1)");
  if (!(s.constants.eps0 > 0.0 && s.constants.mu0 > 0.0))
    throw Error::validation("config: physics.eps0 and physics.mu0 must be > 0");
  if (s.impedance_h < 0.0)
    throw Error::validation("config: physics.impedance_h must be >= 0");
  if (is_em_mode(s.mode)) {
    if (s.polarization.norm() == 0.0)
      throw Error::validation("config: physics.polarization must be nonzero");
    s.polarization.normalize();
    if (std::abs(s.polarization.dot(s.incident)) > 1e-9)
      throw Error::validation(
          "config: physics.polarization must be perpendicular to the incident "
          "direction");
  }

  if (doc.contains("ensemble")) {
    const json& e = doc.at("ensemble");
    expect_keys(e, "ensemble",
                {"count", "region", "min_separation", "seed", "density"});
    s.count = static_cast<int>(get_integer(e, "ensemble", "count", 0));
    if (e.contains("region")) {
      const json& r = e.at("region");
      expect_keys(r, "ensemble.region", {"min", "max"});
      s.region.lo = get_vec3(r.at("min"), "ensemble.region.min");
      s.region.hi = get_vec3(r.at("max"), "ensemble.region.max");
    }
    s.min_separation = get_number(e, "ensemble", "min_separation", 0.5);
    s.seed = static_cast<std::uint64_t>(get_integer(e, "ensemble", "seed", 1));
    if (e.contains("density")) {
      const json& d = e.at("density");
      expect_keys(d, "ensemble.density", {"kind", "amplitude", "center", "width"});
      DensitySpec spec;
      spec.kind = get_string(d, "ensemble.density", "kind");
      spec.amplitude = get_number(d, "ensemble.density", "amplitude", 1.0);
      if (d.contains("center"))
        spec.center = get_vec3(d["center"], "ensemble.density.center");
      spec.width = get_number(d, "ensemble.density", "width", 1.0);
      if (!(spec.amplitude > 0.0))
        throw Error::validation("config: ensemble.density.amplitude must be > 0");
      if (spec.kind == "gaussian" && !(spec.width > 0.0))
        throw Error::validation("config: ensemble.density.width must be > 0");
      s.density = spec;
    }
  }
  if (is_solver_mode(s.mode) || s.mode == "compare") {
    if (!s.region.valid())
      throw Error::validation("config: ensemble.region must have max > min");
    if (s.count < 0)
      throw Error::validation("config: ensemble.count must be >= 0");
    if (!(s.min_separation > 0.0))
      throw Error::validation("config: ensemble.min_separation must be > 0");
    const double packing =
        static_cast<double>(std::max(s.count, 1)) * s.min_separation *
        s.min_separation * s.min_separation;
    if (s.count > 0 && packing >= 0.3 * s.region.volume())
      throw Error::validation(
          "config: infeasible packing, count*min_separation^3 must stay below "
          "0.3*volume(region)");
  }

  if (doc.contains("numerics")) {
    const json& nsec = doc.at("numerics");
    expect_keys(nsec, "numerics",
                {"series_order", "grid", "solver_tolerance", "separation_safety",
                 "allow_regime_violation", "quadrature", "solver", "dense_limit"});
    s.series_order =
        static_cast<int>(get_integer(nsec, "numerics", "series_order", 4));
    if (nsec.contains("grid")) {
      const json& g = nsec.at("grid");
      if (!g.is_array() || g.size() != 3)
        throw Error::validation("config: numerics.grid must be [nx, ny, nz]");
      for (int ax = 0; ax < 3; ++ax) {
        if (!g[static_cast<std::size_t>(ax)].is_number_integer())
          throw Error::validation("config: numerics.grid must hold integers");
        s.grid[static_cast<std::size_t>(ax)] =
            g[static_cast<std::size_t>(ax)].get<int>();
      }
    }
    s.solver_tolerance = get_number(nsec, "numerics", "solver_tolerance", 1e-10);
    s.separation_safety =
        get_number(nsec, "numerics", "separation_safety", 10.0);
    s.allow_regime_violation =
        get_bool(nsec, "numerics", "allow_regime_violation", false);
    std::string quad =
        get_string(nsec, "numerics", "quadrature", std::string("centroid"));
    if (quad == "centroid")
      s.quadrature = PanelRule::centroid;
    else if (quad == "three-point")
      s.quadrature = PanelRule::three_point;
    else
      throw Error::validation(
          "config: numerics.quadrature must be centroid or three-point");
    std::string solver =
        get_string(nsec, "numerics", "solver", std::string("auto"));
    if (solver == "auto")
      s.solver = ContinuumOptions::Solver::automatic;
    else if (solver == "dense")
      s.solver = ContinuumOptions::Solver::dense;
    else if (solver == "iterative")
      s.solver = ContinuumOptions::Solver::iterative;
    else
      throw Error::validation(
          "config: numerics.solver must be auto, dense or iterative");
    s.dense_limit =
        static_cast<int>(get_integer(nsec, "numerics", "dense_limit", 4096));
  }
  if (s.series_order < 1)
    throw Error::validation("config: numerics.series_order must be >= 1");
  for (int ax = 0; ax < 3; ++ax)
    if (s.grid[static_cast<std::size_t>(ax)] < 1)
      throw Error::validation("config: numerics.grid entries must be >= 1");
  if (!(s.solver_tolerance > 0.0 && s.solver_tolerance < 1e-2))
    throw Error::validation(
        "config: numerics.solver_tolerance must lie in (0, 1e-2)");
  if (s.dense_limit < 1)
    throw Error::validation("config: numerics.dense_limit must be >= 1");

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    expect_keys(o, "output",
                {"dir", "prefix", "probes", "line", "plane", "write_ensemble"});
    s.out_dir = get_string(o, "output", "dir", std::string("out"));
    s.prefix = get_string(o, "output", "prefix", std::string("run"));
    if (o.contains("probes")) {
      const json& ps = o.at("probes");
      if (!ps.is_array())
        throw Error::validation("config: output.probes must be an array");
      for (std::size_t i = 0; i < ps.size(); ++i)
        s.probes.push_back(get_vec3(ps[i], "output.probes[" + std::to_string(i) + "]"));
    }
    if (o.contains("line")) {
      const json& l = o.at("line");
      expect_keys(l, "output.line", {"from", "to", "samples"});
      LineSpec spec;
      spec.from = get_vec3(l.at("from"), "output.line.from");
      spec.to = get_vec3(l.at("to"), "output.line.to");
      spec.samples = static_cast<int>(get_integer(l, "output.line", "samples", 100));
      if (spec.samples < 2)
        throw Error::validation("config: output.line.samples must be >= 2");
      s.line = spec;
    }
    if (o.contains("plane")) {
      const json& pl = o.at("plane");
      expect_keys(pl, "output.plane", {"axis", "value", "samples"});
      PlaneSpec spec;
      std::string axis = get_string(pl, "output.plane", "axis", std::string("z"));
      if (axis == "x") spec.axis = 0;
      else if (axis == "y") spec.axis = 1;
      else if (axis == "z") spec.axis = 2;
      else throw Error::validation("config: output.plane.axis must be x, y or z");
      spec.value = get_number(pl, "output.plane", "value");
      if (pl.contains("samples")) {
        const json& sm = pl.at("samples");
        if (!sm.is_array() || sm.size() != 2 || !sm[0].is_number_integer() ||
            !sm[1].is_number_integer())
          throw Error::validation("config: output.plane.samples must be [n1, n2]");
        spec.n1 = sm[0].get<int>();
        spec.n2 = sm[1].get<int>();
      }
      if (spec.n1 < 2 || spec.n2 < 2)
        throw Error::validation("config: output.plane.samples must be >= 2");
      s.plane = spec;
    }
    s.write_ensemble = get_bool(o, "output", "write_ensemble", false);
  }

  if (doc.contains("compare")) {
    const json& cj = doc.at("compare");
    expect_keys(cj, "compare", {"counts", "seeds"});
    if (cj.contains("counts"))
      for (const auto& v : cj.at("counts")) {
        if (!v.is_number_integer() || v.get<long>() <= 0)
          throw Error::validation("config: compare.counts must be positive integers");
        s.compare_counts.push_back(v.get<int>());
      }
    if (cj.contains("seeds"))
      for (const auto& v : cj.at("seeds")) {
        if (!v.is_number_integer() || v.get<long>() < 0)
          throw Error::validation("config: compare.seeds must be non-negative");
        s.compare_seeds.push_back(static_cast<std::uint64_t>(v.get<long>()));
      }
  }
  if (s.mode == "compare") {
    if (!s.density)
      throw Error::validation("config: compare mode needs ensemble.density");
    if (s.compare_counts.empty())
      throw Error::validation("config: compare mode needs compare.counts");
    if (s.compare_seeds.empty()) s.compare_seeds = {1, 2, 3, 4, 5};
    if (s.probes.empty() && !s.plane)
      throw Error::validation(
          "config: compare mode needs output.probes or output.plane");
    if (s.boundary != BoundaryKind::dirichlet)
      throw Error::validation("config: compare mode supports boundary dirichlet");
  }

  // Plot specs must stay inside the solved region.
  if (s.line) {
    if (!s.region.contains(s.line->from) || !s.region.contains(s.line->to))
      throw Error::validation("config: output.line endpoints must lie inside "
                              "ensemble.region");
  }
  if (s.plane && s.mode != "compare") {
    const int ax = s.plane->axis;
    if (s.plane->value < s.region.lo[ax] || s.plane->value > s.region.hi[ax])
      throw Error::validation(
          "config: output.plane.value must lie inside ensemble.region");
  }
  return s;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text, const std::string& name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error::io(name + ": " + e.what());
  }
  return parse_scenario_json(doc, name);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io(path + ": cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

// ---- pipeline helpers ------------------------------------------------------

namespace {

SurfaceMesh build_body_mesh(const Scenario& s) {
  if (s.body_shape == "sphere")
    return generate_sphere(s.body_radius, s.body_refinement);
  if (s.body_shape == "ellipsoid")
    return generate_ellipsoid(s.body_semiaxes, s.body_refinement);
  return load_mesh(s.body_mesh_path);
}

std::string artifact_path(const Scenario& s, const std::string& suffix) {
  fs::create_directories(s.out_dir);
  return (fs::path(s.out_dir) / (s.prefix + suffix)).string();
}

json polarizability_json(const PolarizabilityResult& r) {
  json doc;
  doc["capacitance"] = r.capacitance;
  doc["volume"] = r.volume;
  doc["area"] = r.area;
  json bs = json::array();
  for (const auto& b : r.b_tensors) bs.push_back(mat3_json(b));
  doc["b"] = std::move(bs);
  doc["alpha"] = mat3_json(r.alpha);
  doc["beta"] = mat3_json(r.beta);
  doc["gamma"] = r.gamma;
  doc["order"] = r.order;
  doc["convergence_ratio"] = r.convergence_ratio;
  doc["convergence_reliable"] = r.convergence_reliable;
  return doc;
}

std::vector<Vec3> line_points(const LineSpec& line) {
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(line.samples));
  for (int i = 0; i < line.samples; ++i) {
    const double t = static_cast<double>(i) / (line.samples - 1);
    pts.push_back(line.from + t * (line.to - line.from));
  }
  return pts;
}

std::vector<Vec3> plane_points(const PlaneSpec& plane, const Box& region) {
  const int a1 = (plane.axis + 1) % 3;
  const int a2 = (plane.axis + 2) % 3;
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(plane.n1) * plane.n2);
  for (int i = 0; i < plane.n1; ++i)
    for (int j = 0; j < plane.n2; ++j) {
      Vec3 p;
      p[plane.axis] = plane.value;
      p[a1] = region.lo[a1] +
              (i + 0.5) * (region.hi[a1] - region.lo[a1]) / plane.n1;
      p[a2] = region.lo[a2] +
              (j + 0.5) * (region.hi[a2] - region.lo[a2]) / plane.n2;
      pts.push_back(p);
    }
  return pts;
}

void write_scalar_csv(const std::string& path, std::span<const Vec3> pts,
                      std::span<const Complex> values) {
  std::ostringstream out;
  out << "x,y,z,re_u,im_u,abs_u\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out << format_g17(pts[i].x()) << ',' << format_g17(pts[i].y()) << ','
        << format_g17(pts[i].z()) << ',' << format_g17(values[i].real()) << ','
        << format_g17(values[i].imag()) << ',' << format_g17(std::abs(values[i]))
        << '\n';
  }
  write_text(path, out.str());
}

void write_em_csv(const std::string& path, std::span<const Vec3> pts,
                  std::span<const Vec6c> values) {
  std::ostringstream out;
  out << "x,y,z";
  const char* names[6] = {"Ex", "Ey", "Ez", "Hx", "Hy", "Hz"};
  for (const char* n : names) out << ",re_" << n << ",im_" << n;
  out << ",abs_E,abs_H\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out << format_g17(pts[i].x()) << ',' << format_g17(pts[i].y()) << ','
        << format_g17(pts[i].z());
    for (int c = 0; c < 6; ++c)
      out << ',' << format_g17(values[i](c).real()) << ','
          << format_g17(values[i](c).imag());
    out << ',' << format_g17(values[i].head<3>().norm()) << ','
        << format_g17(values[i].tail<3>().norm()) << '\n';
  }
  write_text(path, out.str());
}

// Body template with the impedance parameter and EM tensors filled in.
BodyProperties make_body_template(const Scenario& s,
                                  const PolarizabilityResult& pol,
                                  const SurfaceMesh& mesh) {
  BodyProperties body = body_from_polarizability(
      pol, s.boundary == BoundaryKind::impedance ? s.impedance_h : 0.0);
  body.radius = mesh.body_radius();
  body.beta_tilde =
      alpha_from_b(pol.b_tensors, pol.volume, s.gamma_tilde,
                   std::min<int>(s.series_order,
                                 static_cast<int>(pol.b_tensors.size()) - 1)) +
      pol.beta;
  return body;
}

ParticleEnsemble build_ensemble(const Scenario& s, const BodyProperties& body) {
  DensityFn weight;
  if (s.density) weight = s.density->make(s.region);
  ParticleEnsemble e =
      sample_ensemble(s.region, s.count, s.min_separation, body, s.seed, weight);
  e.boundary = s.boundary;
  e.k = s.k;
  e.incident = s.incident;
  return e;
}

void run_polarizability(const Scenario& s, std::ostream& log) {
  SurfaceMesh mesh = build_body_mesh(s);
  PolarizabilityResult pol =
      analyze_body(mesh, s.gamma, s.series_order, s.quadrature);
  const std::string path = artifact_path(s, "_polarizability.json");
  write_json(path, polarizability_json(pol));
  log << "polarizability: capacitance=" << pol.capacitance
      << " volume=" << pol.volume << " area=" << pol.area
      << " alpha_trace=" << pol.alpha.trace()
      << " convergence_ratio=" << pol.convergence_ratio << "\n"
      << "wrote " << path << "\n";
}

void run_acoustic_discrete(const Scenario& s, std::ostream& log) {
  SurfaceMesh mesh = build_body_mesh(s);
  PolarizabilityResult pol =
      analyze_body(mesh, s.gamma, s.series_order, s.quadrature);
  BodyProperties body = make_body_template(s, pol, mesh);
  ParticleEnsemble e = build_ensemble(s, body);

  DiscreteFieldSolution sol;
  switch (s.boundary) {
    case BoundaryKind::dirichlet: sol = solve_dirichlet(e); break;
    case BoundaryKind::neumann: sol = solve_neumann(e); break;
    case BoundaryKind::impedance: sol = solve_impedance(e); break;
  }
  if (sol.regime_checked) log << "regime: " << sol.regime.summary() << "\n";
  log << "solved " << e.size() << " bodies, residual=" << sol.residual << "\n";

  json doc;
  doc["boundary"] = to_string(s.boundary);
  doc["k"] = s.k;
  doc["incident_direction"] = vec3_json(s.incident);
  doc["residual"] = sol.residual;
  json bodies = json::array();
  for (std::size_t j = 0; j < e.size(); ++j) {
    json jb;
    jb["position"] = vec3_json(e.positions[j]);
    jb["u_e"] = cvec_json(sol.u(static_cast<Eigen::Index>(j)));
    if (s.boundary == BoundaryKind::neumann) {
      json grads = json::array();
      for (int p = 0; p < 3; ++p)
        grads.push_back(cvec_json(sol.grad_u(p, static_cast<Eigen::Index>(j))));
      jb["grad_u_e"] = std::move(grads);
    } else {
      jb["Q"] = cvec_json(sol.charge(static_cast<Eigen::Index>(j)));
    }
    bodies.push_back(std::move(jb));
  }
  doc["bodies"] = std::move(bodies);
  const std::string path = artifact_path(s, "_bodies.json");
  write_json(path, doc);
  log << "wrote " << path << "\n";

  if (s.write_ensemble) {
    const std::string epath = artifact_path(s, "_ensemble.json");
    save_ensemble(e, epath);
    log << "wrote " << epath << "\n";
  }
  if (!s.probes.empty()) {
    auto vals = evaluate_field(sol, e, s.probes, s.separation_safety);
    const std::string fpath = artifact_path(s, "_field.csv");
    write_scalar_csv(fpath, s.probes, vals);
    log << "wrote " << fpath << "\n";
  }
  if (s.line) {
    auto pts = line_points(*s.line);
    auto vals = evaluate_field(sol, e, pts, s.separation_safety);
    const std::string lpath = artifact_path(s, "_line.csv");
    write_scalar_csv(lpath, pts, vals);
    log << "wrote " << lpath << "\n";
  }
  if (s.plane) {
    auto pts = plane_points(*s.plane, s.region);
    auto vals = evaluate_field(sol, e, pts, s.separation_safety);
    const std::string ppath = artifact_path(s, "_plane.csv");
    write_scalar_csv(ppath, pts, vals);
    log << "wrote " << ppath << "\n";
  }
}

void write_grid_outputs(const Scenario& s, const GridFieldSolution& sol,
                        const DensityFields& fields, std::ostream& log) {
  std::ostringstream out;
  const bool hard = sol.kind == ContinuumKind::hard;
  out << "x,y,z,re_u,im_u" << (hard ? ",re_dux,im_dux,re_duy,im_duy,re_duz,im_duz" : "")
      << "\n";
  const std::size_t n = sol.grid.cell_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = sol.grid.center(i);
    const Complex u = sol.u(static_cast<Eigen::Index>(i));
    out << format_g17(p.x()) << ',' << format_g17(p.y()) << ','
        << format_g17(p.z()) << ',' << format_g17(u.real()) << ','
        << format_g17(u.imag());
    if (hard)
      for (int q = 0; q < 3; ++q) {
        const Complex d = sol.grad_u(q, static_cast<Eigen::Index>(i));
        out << ',' << format_g17(d.real()) << ',' << format_g17(d.imag());
      }
    out << '\n';
  }
  const std::string gpath = artifact_path(s, "_grid.csv");
  write_text(gpath, out.str());

  json meta;
  meta["grid"] = {sol.grid.dims[0], sol.grid.dims[1], sol.grid.dims[2]};
  meta["region"] = {{"min", vec3_json(sol.grid.box.lo)},
                    {"max", vec3_json(sol.grid.box.hi)}};
  meta["k"] = sol.k;
  meta["incident_direction"] = vec3_json(sol.incident);
  meta["method"] = sol.method;
  meta["iterations"] = sol.iterations;
  meta["residual"] = sol.residual;
  if (hard) {
    meta["closure"] = sol.closure;
    meta["closure_helmholtz_residual"] = helmholtz_residual(sol, sol.k);
    meta["caveats"] = json::array(
        {"the volume density V(y) is treated as the supplied finite density; "
         "it vanishes in the strict separation limit"});
  }
  if (sol.kind == ContinuumKind::soft) {
    bool coarse = sol.grid.dims[0] < 5 || sol.grid.dims[1] < 5 || sol.grid.dims[2] < 5;
    if (!coarse)
      meta["schrodinger_residual"] = schrodinger_residual(sol, fields, sol.k);
  }
  const std::string mpath = artifact_path(s, "_grid.json");
  write_json(mpath, meta);
  log << "wrote " << gpath << "\n" << "wrote " << mpath << "\n";
}

void run_acoustic_continuum(const Scenario& s, std::ostream& log) {
  SurfaceMesh mesh = build_body_mesh(s);
  PolarizabilityResult pol =
      analyze_body(mesh, s.gamma, s.series_order, s.quadrature);
  BodyProperties body = make_body_template(s, pol, mesh);
  ParticleEnsemble e = build_ensemble(s, body);
  if (e.size() > 0) log << "regime: " << check_regime(e, WaveMode::acoustic).summary() << "\n";
  DensityFields fields = bin_densities(e, s.grid);

  GridFieldSolution sol;
  switch (s.boundary) {
    case BoundaryKind::dirichlet:
      sol = solve_soft(fields, s.k, s.incident, s.continuum_options());
      break;
    case BoundaryKind::impedance:
      sol = solve_impedance_continuum(fields, s.k, s.incident,
                                      s.continuum_options());
      break;
    case BoundaryKind::neumann:
      sol = solve_hard(fields, s.k, s.incident, s.continuum_options());
      break;
  }
  log << "continuum solve: method=" << sol.method
      << " iterations=" << sol.iterations << " residual=" << sol.residual
      << "\n";
  write_grid_outputs(s, sol, fields, log);
  if (s.write_ensemble) {
    const std::string epath = artifact_path(s, "_ensemble.json");
    save_ensemble(e, epath);
    log << "wrote " << epath << "\n";
  }
  if (!s.probes.empty()) {
    auto vals = evaluate_continuum_field(sol, fields, s.probes);
    const std::string fpath = artifact_path(s, "_field.csv");
    write_scalar_csv(fpath, s.probes, vals);
    log << "wrote " << fpath << "\n";
  }
  if (s.line) {
    auto pts = line_points(*s.line);
    auto vals = evaluate_continuum_field(sol, fields, pts);
    const std::string lpath = artifact_path(s, "_line.csv");
    write_scalar_csv(lpath, pts, vals);
    log << "wrote " << lpath << "\n";
  }
  if (s.plane) {
    auto pts = plane_points(*s.plane, s.region);
    auto vals = evaluate_continuum_field(sol, fields, pts);
    const std::string ppath = artifact_path(s, "_plane.csv");
    write_scalar_csv(ppath, pts, vals);
    log << "wrote " << ppath << "\n";
  }
}

void run_em_discrete(const Scenario& s, std::ostream& log) {
  SurfaceMesh mesh = build_body_mesh(s);
  PolarizabilityResult pol =
      analyze_body(mesh, s.gamma, s.series_order, s.quadrature);
  BodyProperties body = make_body_template(s, pol, mesh);
  ParticleEnsemble e = build_ensemble(s, body);

  EmDiscreteSolution sol = solve_em_discrete(e, s.polarization, s.constants,
                                             s.allow_regime_violation);
  if (sol.regime_checked) log << "regime: " << sol.regime.summary() << "\n";
  log << "solved " << e.size() << " bodies, residual=" << sol.residual << "\n";

  json doc;
  doc["k"] = s.k;
  doc["incident_direction"] = vec3_json(s.incident);
  doc["polarization"] = vec3_json(s.polarization);
  doc["eps0"] = s.constants.eps0;
  doc["mu0"] = s.constants.mu0;
  doc["conventions"] = {{"kernel", "exp(ikr)/r"},
                        {"smatrix_prefactor", "k^2 V / (4 pi)"}};
  doc["residual"] = sol.residual;
  json bodies = json::array();
  const char* names[6] = {"Ex", "Ey", "Ez", "Hx", "Hy", "Hz"};
  for (std::size_t j = 0; j < e.size(); ++j) {
    json jb;
    jb["position"] = vec3_json(e.positions[j]);
    for (int c = 0; c < 6; ++c)
      jb[names[c]] = cvec_json(sol.U(static_cast<Eigen::Index>(6 * j + c)));
    bodies.push_back(std::move(jb));
  }
  doc["bodies"] = std::move(bodies);
  const std::string path = artifact_path(s, "_bodies.json");
  write_json(path, doc);
  log << "wrote " << path << "\n";

  if (s.write_ensemble) {
    const std::string epath = artifact_path(s, "_ensemble.json");
    save_ensemble(e, epath);
    log << "wrote " << epath << "\n";
  }
  auto emit_points = [&](const std::vector<Vec3>& pts, const std::string& suffix) {
    auto vals = evaluate_em_field(sol, e, pts);
    const std::string path2 = artifact_path(s, suffix);
    write_em_csv(path2, pts, vals);
    log << "wrote " << path2 << "\n";
  };
  if (!s.probes.empty()) emit_points(s.probes, "_field.csv");
  if (s.line) emit_points(line_points(*s.line), "_line.csv");
  if (s.plane) emit_points(plane_points(*s.plane, s.region), "_plane.csv");
}

void run_em_continuum(const Scenario& s, std::ostream& log) {
  SurfaceMesh mesh = build_body_mesh(s);
  PolarizabilityResult pol =
      analyze_body(mesh, s.gamma, s.series_order, s.quadrature);
  BodyProperties body = make_body_template(s, pol, mesh);
  ParticleEnsemble e = build_ensemble(s, body);
  if (e.size() > 0) {
    RegimeReport regime = check_regime(e, WaveMode::em);
    log << "regime: " << regime.summary() << "\n";
    if (!regime.far_zone_ok && !s.allow_regime_violation)
      throw Error::validation(
          "em-continuum: far-zone assumption violated (" + regime.summary() +
          "); set numerics.allow_regime_violation to proceed");
  }
  DensityFields fields = bin_densities(e, s.grid);
  EmGridSolution sol = solve_em_continuum(fields, s.k, s.incident,
                                          s.polarization, s.constants,
                                          s.continuum_options());
  log << "continuum solve: method=" << sol.method
      << " iterations=" << sol.iterations << " residual=" << sol.residual
      << " self_cell_estimate=" << sol.self_cell_estimate << "\n";

  std::ostringstream out;
  out << "x,y,z";
  const char* names[6] = {"Ex", "Ey", "Ez", "Hx", "Hy", "Hz"};
  for (const char* n : names) out << ",re_" << n << ",im_" << n;
  out << "\n";
  const std::size_t n = sol.grid.cell_count();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = sol.grid.center(i);
    out << format_g17(p.x()) << ',' << format_g17(p.y()) << ','
        << format_g17(p.z());
    for (int c = 0; c < 6; ++c) {
      const Complex z = sol.U(static_cast<Eigen::Index>(6 * i + c));
      out << ',' << format_g17(z.real()) << ',' << format_g17(z.imag());
    }
    out << '\n';
  }
  const std::string gpath = artifact_path(s, "_grid.csv");
  write_text(gpath, out.str());

  json meta;
  meta["grid"] = {sol.grid.dims[0], sol.grid.dims[1], sol.grid.dims[2]};
  meta["region"] = {{"min", vec3_json(sol.grid.box.lo)},
                    {"max", vec3_json(sol.grid.box.hi)}};
  meta["k"] = sol.k;
  meta["incident_direction"] = vec3_json(sol.incident);
  meta["polarization"] = vec3_json(sol.polarization);
  meta["eps0"] = sol.constants.eps0;
  meta["mu0"] = sol.constants.mu0;
  meta["conventions"] = {{"kernel", "exp(ikr)/r"},
                         {"smatrix_prefactor", "k^2 V / (4 pi)"}};
  meta["method"] = sol.method;
  meta["iterations"] = sol.iterations;
  meta["residual"] = sol.residual;
  meta["self_cell_estimate"] = sol.self_cell_estimate;
  const std::string mpath = artifact_path(s, "_grid.json");
  write_json(mpath, meta);
  log << "wrote " << gpath << "\n" << "wrote " << mpath << "\n";

  auto emit_points = [&](const std::vector<Vec3>& pts, const std::string& suffix) {
    auto vals = evaluate_em_continuum_field(sol, fields, pts);
    const std::string path2 = artifact_path(s, suffix);
    write_em_csv(path2, pts, vals);
    log << "wrote " << path2 << "\n";
  };
  if (!s.probes.empty()) emit_points(s.probes, "_field.csv");
  if (s.line) emit_points(line_points(*s.line), "_line.csv");
  if (s.plane) emit_points(plane_points(*s.plane, s.region), "_plane.csv");
}

void run_compare(const Scenario& s, std::ostream& log) {
  const DensityFn target = s.density->make(s.region);
  const Grid3 grid(s.region, s.grid);
  DensityFields fields = fields_from_function(grid, target);

  double total_capacitance = 0.0;
  for (double c : fields.capacitance) total_capacitance += c;
  total_capacitance *= grid.cell_volume();
  if (!(total_capacitance > 0.0))
    throw Error::validation("compare: target density integrates to zero");

  GridFieldSolution cont = solve_soft(fields, s.k, s.incident,
                                      s.continuum_options());
  log << "continuum solve: method=" << cont.method
      << " iterations=" << cont.iterations << " residual=" << cont.residual
      << "\n";

  std::vector<Vec3> pts = s.probes;
  if (pts.empty()) pts = plane_points(*s.plane, s.region);
  auto reference = evaluate_continuum_field(cont, fields, pts);
  double ref_norm = 0.0;
  for (const Complex& v : reference) ref_norm += std::norm(v);
  ref_norm = std::sqrt(ref_norm);

  json runs = json::array();
  std::vector<double> distances;
  for (int count : s.compare_counts) {
    std::vector<Complex> mean(pts.size(), 0.0);
    double residual_max = 0.0;
    for (std::uint64_t seed : s.compare_seeds) {
      BodyProperties body;
      body.capacitance = total_capacitance / count;
      body.radius = body.capacitance / (4.0 * kPi);
      body.volume = 4.0 / 3.0 * kPi * std::pow(body.radius, 3);
      body.area = 4.0 * kPi * body.radius * body.radius;
      body.beta = -1.5 * Mat3::Identity();
      ParticleEnsemble e = sample_ensemble(s.region, count, s.min_separation,
                                           body, seed, target);
      e.boundary = BoundaryKind::dirichlet;
      e.k = s.k;
      e.incident = s.incident;
      DiscreteFieldSolution sol = solve_dirichlet(e);
      residual_max = std::max(residual_max, sol.residual);
      auto vals = evaluate_field(sol, e, pts, s.separation_safety);
      for (std::size_t i = 0; i < pts.size(); ++i)
        mean[i] += vals[i] / static_cast<double>(s.compare_seeds.size());
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      dist += std::norm(mean[i] - reference[i]);
    dist = std::sqrt(dist) / ref_norm;
    distances.push_back(dist);
    log << "J=" << count << " relative_l2=" << dist
        << " max_residual=" << residual_max << "\n";
    runs.push_back({{"count", count},
                    {"seeds", s.compare_seeds.size()},
                    {"relative_l2", dist},
                    {"max_residual", residual_max}});
  }

  bool monotone = true;
  for (std::size_t i = 1; i < distances.size(); ++i)
    monotone = monotone && distances[i] < distances[i - 1];

  json doc;
  doc["mode"] = "compare";
  doc["k"] = s.k;
  doc["total_capacitance"] = total_capacitance;
  doc["continuum"] = {{"method", cont.method},
                      {"residual", cont.residual},
                      {"grid", {grid.dims[0], grid.dims[1], grid.dims[2]}}};
  doc["probe_count"] = pts.size();
  doc["runs"] = std::move(runs);
  doc["monotone_decreasing"] = monotone;
  const std::string path = artifact_path(s, "_compare.json");
  write_json(path, doc);
  log << "monotone_decreasing=" << (monotone ? "true" : "false") << "\n"
      << "wrote " << path << "\n";
}

}  // namespace

void run_scenario(const Scenario& s, std::ostream& log) {
  if (s.mode == "polarizability") return run_polarizability(s, log);
  if (s.mode == "acoustic-discrete") return run_acoustic_discrete(s, log);
  if (s.mode == "acoustic-continuum") return run_acoustic_continuum(s, log);
  if (s.mode == "em-discrete") return run_em_discrete(s, log);
  if (s.mode == "em-continuum") return run_em_continuum(s, log);
  if (s.mode == "compare") return run_compare(s, log);
  throw Error::validation("unknown mode '" + s.mode + "'");
}

}  // namespace smallscat
