#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "smallscat/acoustic_continuum.hpp"
#include "smallscat/em.hpp"
#include "smallscat/ensemble.hpp"

namespace smallscat {

struct LineSpec {
  Vec3 from = Vec3::Zero();
  Vec3 to = Vec3::Zero();
  int samples = 100;
};

struct PlaneSpec {
  int axis = 2;        // 0=x, 1=y, 2=z
  double value = 0.0;  // coordinate of the plane along `axis`
  int n1 = 50, n2 = 50;
};

/// Smooth target densities used for sampling weights and the
/// discrete-vs-continuum comparisons.
struct DensitySpec {
  std::string kind = "uniform";  // uniform | sin2-bump | gaussian
  double amplitude = 1.0;
  Vec3 center = Vec3::Zero();
  double width = 1.0;

  DensityFn make(const Box& region) const;
};

/// One fully validated run description. Field names follow the JSON schema
/// documented in the README.
struct Scenario {
  std::string mode;

  // body
  std::string body_shape = "sphere";  // sphere | ellipsoid | mesh
  double body_radius = 1.0;
  Vec3 body_semiaxes = Vec3(1, 1, 1);
  std::string body_mesh_path;
  int body_refinement = 3;

  // physics
  double k = 1.0;
  Vec3 incident = Vec3(0, 0, 1);
  Vec3 polarization = Vec3(1, 0, 0);
  BoundaryKind boundary = BoundaryKind::dirichlet;
  double impedance_h = 1.0;
  double gamma = 0.5;
  double gamma_tilde = 0.0;
  EmConstants constants;

  // ensemble
  int count = 0;
  Box region{Vec3(0, 0, 0), Vec3(10, 10, 10)};
  double min_separation = 0.5;
  std::uint64_t seed = 1;
  std::optional<DensitySpec> density;

  // numerics
  int series_order = 4;
  std::array<int, 3> grid = {16, 16, 16};
  double solver_tolerance = 1e-10;
  double separation_safety = 10.0;
  bool allow_regime_violation = false;
  PanelRule quadrature = PanelRule::centroid;
  ContinuumOptions::Solver solver = ContinuumOptions::Solver::automatic;
  int dense_limit = 4096;

  // output
  std::string out_dir = "out";
  std::string prefix = "run";
  std::vector<Vec3> probes;
  std::optional<LineSpec> line;
  std::optional<PlaneSpec> plane;
  bool write_ensemble = false;

  // compare
  std::vector<int> compare_counts;
  std::vector<std::uint64_t> compare_seeds;

  ContinuumOptions continuum_options() const;
};

/// Parses and validates a scenario file. Unknown keys and precondition
/// violations are reported with their JSON path.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& name);

/// Executes the pipeline for the scenario's mode, writes the declared
/// artifacts under out_dir, and prints a run summary to `log`.
void run_scenario(const Scenario& scenario, std::ostream& log);

/// 17-significant-digit decimal formatting used for all CSV output.
std::string format_g17(double v);

}  // namespace smallscat
