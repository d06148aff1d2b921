#include "smallscat/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

namespace smallscat {

namespace {

using nlohmann::json;

// 53-bit uniform in [0, 1); avoids library-specific distribution behavior.
double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

json mat3_to_json(const Mat3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

Mat3 mat3_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3)
    throw Error::io(what + ": expected 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != 3)
      throw Error::io(what + ": expected 3x3 matrix");
    for (int c = 0; c < 3; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

std::string to_string(BoundaryKind kind) {
  switch (kind) {
    case BoundaryKind::dirichlet: return "dirichlet";
    case BoundaryKind::neumann: return "neumann";
    case BoundaryKind::impedance: return "impedance";
  }
  return "dirichlet";
}

BoundaryKind boundary_from_string(const std::string& name) {
  if (name == "dirichlet") return BoundaryKind::dirichlet;
  if (name == "neumann") return BoundaryKind::neumann;
  if (name == "impedance") return BoundaryKind::impedance;
  throw Error::validation("unknown boundary kind '" + name + "'");
}

double BodyProperties::impedance_weight() const {
  if (h < 0.0) throw Error::validation("impedance h must be >= 0");
  if (h == 0.0) return 0.0;
  if (!(capacitance > 0.0))
    throw Error::validation("impedance weight needs capacitance > 0");
  return h * area / (1.0 + h * area / capacitance);
}

BodyProperties body_from_polarizability(const PolarizabilityResult& r,
                                        double h) {
  BodyProperties b;
  b.capacitance = r.capacitance;
  b.volume = r.volume;
  b.area = r.area;
  b.beta = r.beta;
  b.alpha = r.alpha;
  b.h = h;
  return b;
}

double ParticleEnsemble::min_pairwise_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      best = std::min(best, (positions[i] - positions[j]).norm());
  return best;
}

double ParticleEnsemble::max_body_radius() const {
  double best = 0.0;
  for (const auto& b : bodies) best = std::max(best, b.radius);
  return best;
}

std::string RegimeReport::summary() const {
  std::ostringstream out;
  out << "bodies=" << body_count << " ka=" << ka << (ka_ok ? " (ok)" : " (VIOLATED)")
      << " a/d=" << a_over_d << (separation_ok ? " (ok)" : " (VIOLATED)");
  if (mode == WaveMode::em)
    out << " kd=" << kd << (far_zone_ok ? " (ok)" : " (VIOLATED)");
  out << " a/d^3=" << a_over_d_cubed << " volume_fraction=" << volume_fraction
      << (volume_density_ok ? "" : " (volume density O(1): d >> a violated)");
  return out.str();
}

RegimeReport check_regime(const ParticleEnsemble& ensemble, WaveMode mode,
                          const RegimeThresholds& thresholds) {
  if (ensemble.size() == 0)
    throw Error::validation("check_regime: ensemble is empty");
  RegimeReport r;
  r.mode = mode;
  r.body_count = ensemble.size();
  const double a = ensemble.max_body_radius();
  const double d = ensemble.min_pairwise_distance();
  const double k = ensemble.k;
  r.ka = k * a;
  r.a_over_d = std::isinf(d) ? 0.0 : a / d;
  r.kd = k * d;
  r.a_over_d_cubed = std::isinf(d) ? 0.0 : a / (d * d * d);
  const double region_volume = ensemble.region.valid() ? ensemble.region.volume() : 0.0;
  r.volume_fraction = region_volume > 0.0
                          ? static_cast<double>(ensemble.size()) * a * a * a /
                                region_volume
                          : 0.0;
  r.ka_ok = r.ka < thresholds.small_ratio;
  r.separation_ok = r.a_over_d < thresholds.small_ratio;
  r.far_zone_ok = r.kd > thresholds.far_zone_kd;
  r.volume_density_ok = r.volume_fraction < thresholds.max_volume_fraction;
  return r;
}

ParticleEnsemble sample_ensemble(const Box& region, int count,
                                 double min_separation,
                                 const BodyProperties& body,
                                 std::uint64_t seed, const DensityFn& weight) {
  if (!region.valid())
    throw Error::validation("sample_ensemble: region box is degenerate");
  if (count < 0) throw Error::validation("sample_ensemble: count must be >= 0");
  if (!(min_separation > 0.0))
    throw Error::validation("sample_ensemble: min_separation must be > 0");
  const double packing = static_cast<double>(count) * min_separation *
                         min_separation * min_separation;
  if (packing >= 0.3 * region.volume())
    throw Error::validation(
        "sample_ensemble: infeasible packing, count*min_separation^3 must stay "
        "below 0.3*volume(region)");

  ParticleEnsemble e;
  e.region = region;
  e.positions.reserve(static_cast<std::size_t>(count));
  e.bodies.assign(static_cast<std::size_t>(count), body);
  if (count == 0) return e;

  std::mt19937_64 rng(seed);
  double weight_max = 0.0;
  if (weight) {
    // Bound the acceptance ratio by scanning a coarse lattice.
    const int probe = 24;
    for (int i = 0; i < probe; ++i)
      for (int j = 0; j < probe; ++j)
        for (int l = 0; l < probe; ++l) {
          Vec3 p = region.lo + region.extent().cwiseProduct(
                                   Vec3((i + 0.5) / probe, (j + 0.5) / probe,
                                        (l + 0.5) / probe));
          weight_max = std::max(weight_max, weight(p));
        }
    if (!(weight_max > 0.0))
      throw Error::validation("sample_ensemble: sampling weight is zero everywhere");
    weight_max *= 1.2;  // headroom over the lattice maximum
  }

  const std::uint64_t budget =
      1000ull * static_cast<std::uint64_t>(count) + 100000ull;
  std::uint64_t attempts = 0;
  const double sep_sq = min_separation * min_separation;
  while (e.positions.size() < static_cast<std::size_t>(count)) {
    if (attempts++ > budget)
      throw Error::numerical(
          "sample_ensemble: placement budget exhausted after placing " +
          std::to_string(e.positions.size()) + " of " + std::to_string(count) +
          " bodies");
    Vec3 p = region.lo + region.extent().cwiseProduct(
                             Vec3(next_uniform(rng), next_uniform(rng),
                                  next_uniform(rng)));
    if (weight) {
      double w = weight(p);
      if (w <= 0.0) continue;
      if (next_uniform(rng) * weight_max > w) continue;
    }
    bool ok = true;
    for (const auto& q : e.positions)
      if ((p - q).squaredNorm() < sep_sq) {
        ok = false;
        break;
      }
    if (ok) e.positions.push_back(p);
  }
  return e;
}

Mat3 DensityFields::beta_at(std::size_t cell) const {
  if (volume[cell] <= 0.0) return Mat3::Zero();
  return beta_volume[cell] / volume[cell];
}

DensityFields bin_densities(const ParticleEnsemble& ensemble,
                            std::array<int, 3> dims) {
  if (!ensemble.region.valid())
    throw Error::validation("bin_densities: ensemble has no region");
  DensityFields f;
  f.grid = Grid3(ensemble.region, dims);
  const std::size_t n = f.grid.cell_count();
  f.capacitance.assign(n, 0.0);
  f.volume.assign(n, 0.0);
  f.impedance_weight.assign(n, 0.0);
  f.beta_volume.assign(n, Mat3::Zero());
  f.alpha_volume.assign(n, Mat3::Zero());
  f.beta_tilde_volume.assign(n, Mat3::Zero());

  const double cell_volume = f.grid.cell_volume();
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    auto c = f.grid.locate(ensemble.positions[i]);  // throws when outside
    std::size_t idx = f.grid.index(c[0], c[1], c[2]);
    const BodyProperties& b = ensemble.bodies[i];
    f.capacitance[idx] += b.capacitance / cell_volume;
    f.volume[idx] += b.volume / cell_volume;
    f.impedance_weight[idx] += b.impedance_weight() / cell_volume;
    f.beta_volume[idx] += b.beta * b.volume / cell_volume;
    f.alpha_volume[idx] += b.alpha * b.volume / cell_volume;
    f.beta_tilde_volume[idx] += b.beta_tilde * b.volume / cell_volume;
  }
  return f;
}

DensityFields fields_from_function(const Grid3& grid,
                                   const DensityFn& capacitance_density) {
  DensityFields f;
  f.grid = grid;
  const std::size_t n = grid.cell_count();
  f.capacitance.assign(n, 0.0);
  f.volume.assign(n, 0.0);
  f.impedance_weight.assign(n, 0.0);
  f.beta_volume.assign(n, Mat3::Zero());
  f.alpha_volume.assign(n, Mat3::Zero());
  f.beta_tilde_volume.assign(n, Mat3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    double c = capacitance_density(grid.center(i));
    if (c < 0.0)
      throw Error::validation("density function must be non-negative");
    f.capacitance[i] = c;
    f.impedance_weight[i] = c;
  }
  return f;
}

void save_ensemble(const ParticleEnsemble& ensemble, const std::string& path) {
  json doc;
  doc["boundary"] = to_string(ensemble.boundary);
  doc["k"] = ensemble.k;
  doc["incident_direction"] = {ensemble.incident.x(), ensemble.incident.y(),
                               ensemble.incident.z()};
  doc["region"] = {{"min", {ensemble.region.lo.x(), ensemble.region.lo.y(),
                            ensemble.region.lo.z()}},
                   {"max", {ensemble.region.hi.x(), ensemble.region.hi.y(),
                            ensemble.region.hi.z()}}};
  json bodies = json::array();
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    const auto& p = ensemble.positions[i];
    const auto& b = ensemble.bodies[i];
    json jb;
    jb["position"] = {p.x(), p.y(), p.z()};
    jb["C"] = b.capacitance;
    jb["V"] = b.volume;
    jb["area"] = b.area;
    jb["beta"] = mat3_to_json(b.beta);
    jb["h"] = b.h;
    if (!b.alpha.isZero(0.0)) jb["alpha"] = mat3_to_json(b.alpha);
    if (!b.beta_tilde.isZero(0.0)) jb["beta_tilde"] = mat3_to_json(b.beta_tilde);
    if (b.radius > 0.0) jb["radius"] = b.radius;
    bodies.push_back(std::move(jb));
  }
  doc["bodies"] = std::move(bodies);
  std::ofstream out(path);
  if (!out) throw Error::io(path + ": cannot open file for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw Error::io(path + ": write failed");
}

ParticleEnsemble load_ensemble(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io(path + ": cannot open file");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error::io(path + ": " + e.what());
  }
  ParticleEnsemble e;
  try {
    e.boundary = boundary_from_string(doc.at("boundary").get<std::string>());
    e.k = doc.at("k").get<double>();
    auto nu = doc.at("incident_direction");
    e.incident = Vec3(nu.at(0).get<double>(), nu.at(1).get<double>(),
                      nu.at(2).get<double>());
    auto region = doc.at("region");
    auto lo = region.at("min");
    auto hi = region.at("max");
    e.region.lo = Vec3(lo.at(0).get<double>(), lo.at(1).get<double>(),
                       lo.at(2).get<double>());
    e.region.hi = Vec3(hi.at(0).get<double>(), hi.at(1).get<double>(),
                       hi.at(2).get<double>());
    for (const auto& jb : doc.at("bodies")) {
      Vec3 p(jb.at("position").at(0).get<double>(),
             jb.at("position").at(1).get<double>(),
             jb.at("position").at(2).get<double>());
      BodyProperties b;
      b.capacitance = jb.at("C").get<double>();
      b.volume = jb.at("V").get<double>();
      b.area = jb.at("area").get<double>();
      b.beta = mat3_from_json(jb.at("beta"), path);
      b.h = jb.at("h").get<double>();
      if (jb.contains("alpha")) b.alpha = mat3_from_json(jb["alpha"], path);
      if (jb.contains("beta_tilde"))
        b.beta_tilde = mat3_from_json(jb["beta_tilde"], path);
      if (jb.contains("radius")) b.radius = jb["radius"].get<double>();
      e.positions.push_back(p);
      e.bodies.push_back(b);
    }
  } catch (const json::exception& err) {
    throw Error::io(path + ": " + err.what());
  }
  return e;
}

}  // namespace smallscat
