#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "smallscat/electrostatics.hpp"
#include "smallscat/grid.hpp"

namespace smallscat {

enum class BoundaryKind { dirichlet, neumann, impedance };

std::string to_string(BoundaryKind kind);
BoundaryKind boundary_from_string(const std::string& name);

/// Scattering-relevant constants of one body. The impedance weight
/// h|S|/(1 + h|S|/C) interpolates between 0 (h = 0) and C (h -> inf).
struct BodyProperties {
  double capacitance = 0.0;
  double volume = 0.0;
  double area = 0.0;
  double radius = 0.0;  // diagnostic size a_j
  double h = 0.0;       // impedance parameter
  Mat3 beta = Mat3::Zero();
  Mat3 alpha = Mat3::Zero();       // electric polarizability (EM use)
  Mat3 beta_tilde = Mat3::Zero();  // magnetic response (EM use)

  double impedance_weight() const;
};

BodyProperties body_from_polarizability(const PolarizabilityResult& r,
                                        double h = 0.0);

struct ParticleEnsemble {
  std::vector<Vec3> positions;
  std::vector<BodyProperties> bodies;  // parallel to positions
  BoundaryKind boundary = BoundaryKind::dirichlet;
  double k = 1.0;
  Vec3 incident = Vec3(0, 0, 1);
  Box region;

  std::size_t size() const { return positions.size(); }
  double min_pairwise_distance() const;  // +inf for fewer than 2 bodies
  double max_body_radius() const;
};

struct RegimeThresholds {
  double small_ratio = 0.1;                      // bounds ka and a/d
  double far_zone_kd = 6.283185307179586476925;  // 2*pi, EM only
  double max_volume_fraction = 0.1;              // flags n*a^3 = O(1)
};

enum class WaveMode { acoustic, em };

/// Diagnostics for the separation-of-scales assumptions. The solvers only
/// warn on acoustic violations; the EM solver refuses far-zone violations
/// unless overridden.
struct RegimeReport {
  std::size_t body_count = 0;
  double ka = 0.0;
  double a_over_d = 0.0;
  double kd = 0.0;
  double a_over_d_cubed = 0.0;   // O(1) in the dense Dirichlet scaling
  double volume_fraction = 0.0;  // (J/vol) * a^3
  bool ka_ok = true;
  bool separation_ok = true;
  bool far_zone_ok = true;       // EM only
  bool volume_density_ok = true;
  WaveMode mode = WaveMode::acoustic;

  bool pass() const {
    bool acoustic = ka_ok && separation_ok;
    return mode == WaveMode::acoustic ? acoustic : acoustic && far_zone_ok;
  }
  std::string summary() const;
};

RegimeReport check_regime(const ParticleEnsemble& ensemble, WaveMode mode,
                          const RegimeThresholds& thresholds = {});

/// Optional non-negative sampling weight for position proposals; empty means
/// uniform over the region.
using DensityFn = std::function<double(const Vec3&)>;

/// Dart-throwing placement with a minimum pairwise separation. Deterministic
/// for a fixed seed. Fails (naming the achieved count) when the retry budget
/// is exhausted, and rejects infeasible packing requests up front.
ParticleEnsemble sample_ensemble(const Box& region, int count,
                                 double min_separation,
                                 const BodyProperties& body,
                                 std::uint64_t seed,
                                 const DensityFn& weight = {});

/// Cell-averaged densities of the per-body quantities: capacitance C(y),
/// volume V(y), the product beta(y)V(y), impedance weight b(y), and the EM
/// tensors alpha(y)V(y), beta_tilde(y)V(y). Binning conserves totals exactly.
struct DensityFields {
  Grid3 grid;
  std::vector<double> capacitance;
  std::vector<double> volume;
  std::vector<double> impedance_weight;
  std::vector<Mat3> beta_volume;
  std::vector<Mat3> alpha_volume;
  std::vector<Mat3> beta_tilde_volume;

  /// beta(y) recovered from the product; zero where no volume was binned.
  Mat3 beta_at(std::size_t cell) const;
};

DensityFields bin_densities(const ParticleEnsemble& ensemble,
                            std::array<int, 3> dims);

/// Analytic density fields on a grid, used by the continuum solvers and the
/// discrete-vs-continuum comparisons.
DensityFields fields_from_function(const Grid3& grid,
                                   const DensityFn& capacitance_density);

void save_ensemble(const ParticleEnsemble& ensemble, const std::string& path);
ParticleEnsemble load_ensemble(const std::string& path);

}  // namespace smallscat
