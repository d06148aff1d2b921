#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smallscat/acoustic_continuum.hpp"
#include "smallscat/ensemble.hpp"

namespace smallscat {

using CVec3 = Eigen::Vector3cd;
using Mat6c = Eigen::Matrix<std::complex<double>, 6, 6>;
using Vec6c = Eigen::Matrix<std::complex<double>, 6, 1>;

struct EmConstants {
  double eps0 = 1.0;
  double mu0 = 1.0;
};

/// Far-field amplitudes of an electric/magnetic point dipole pair (P, M)
/// observed in unit direction nu_prime; brackets are cross products.
struct DipoleFarField {
  CVec3 E;
  CVec3 H;
};
DipoleFarField dipole_far_fields(const CVec3& P, const CVec3& M,
                                 const Vec3& nu_prime, double k,
                                 const EmConstants& c = {});

/// 6x6 map from the incident (E, H) at a small body to the far-zone
/// scattered pair, direction-dependent through nu_prime, with the
/// k^2 V / (4 pi) prefactor included. The scattered field itself is
/// g(r) * S * U with g = exp(ikr)/r.
Mat6c build_smatrix(const Mat3& alpha, const Mat3& beta_tilde, double volume,
                    const Vec3& nu_prime, double k, const EmConstants& c = {});

/// Plane-wave incident pair: E = pol * exp(ik nu.x), H = sqrt(eps0/mu0) nu x E.
Vec6c incident_em(double k, const Vec3& nu, const Vec3& pol, const Vec3& x,
                  const EmConstants& c = {});

struct EmDiscreteSolution {
  double k = 1.0;
  Vec3 incident = Vec3(0, 0, 1);
  Vec3 polarization = Vec3(1, 0, 0);
  EmConstants constants;
  Eigen::VectorXcd U;  // stacked (E, H) per body, 6J
  double residual = 0.0;
  RegimeReport regime;
  bool regime_checked = false;
};

/// Coupled body system with the EM kernel exp(ikr)/r (no 1/4pi; the S-matrix
/// carries the 4pi). Refuses kd <= 2 pi unless override is set.
EmDiscreteSolution solve_em_discrete(const ParticleEnsemble& ensemble,
                                     const Vec3& polarization,
                                     const EmConstants& c = {},
                                     bool allow_regime_violation = false);

std::vector<Vec6c> evaluate_em_field(const EmDiscreteSolution& solution,
                                     const ParticleEnsemble& ensemble,
                                     std::span<const Vec3> points);

struct EmGridSolution {
  Grid3 grid;
  double k = 1.0;
  Vec3 incident = Vec3(0, 0, 1);
  Vec3 polarization = Vec3(1, 0, 0);
  EmConstants constants;
  Eigen::VectorXcd U;  // stacked (E, H) per node, 6N
  double residual = 0.0;
  int iterations = 0;
  std::string method;
  // Magnitude of the neglected self-cell coupling; shrinks under refinement.
  double self_cell_estimate = 0.0;
};

/// Nystrom solve of the EM self-consistent equation over the binned tensor
/// densities alpha(y)V(y) and beta_tilde(y)V(y); the self cell is dropped.
EmGridSolution solve_em_continuum(const DensityFields& fields, double k,
                                  const Vec3& nu, const Vec3& polarization,
                                  const EmConstants& c = {},
                                  const ContinuumOptions& opts = {});

std::vector<Vec6c> evaluate_em_continuum_field(const EmGridSolution& solution,
                                               const DensityFields& fields,
                                               std::span<const Vec3> points);

}  // namespace smallscat
