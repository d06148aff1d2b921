#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "smallscat/ensemble.hpp"

namespace smallscat {

using Complex = std::complex<double>;

/// Free-space kernel exp(ik r)/(4 pi r).
Complex greens(double k, const Vec3& x, const Vec3& y);

/// Incident plane wave exp(ik nu . x).
Complex incident_wave(double k, const Vec3& nu, const Vec3& x);

/// Field values and strengths of the coupled point-scatterer system. For
/// hard (Neumann) bodies the per-body gradient is carried as well and the
/// scattered amplitude depends on the observation direction, so `charge`
/// stays empty there.
struct DiscreteFieldSolution {
  BoundaryKind boundary = BoundaryKind::dirichlet;
  double k = 1.0;
  Vec3 incident = Vec3(0, 0, 1);
  Eigen::VectorXcd u;                // u_e at the body sites
  Eigen::Matrix3Xcd grad_u;          // hard bodies only, 3 x J
  Eigen::VectorXcd charge;           // Q_j for soft/impedance bodies
  double residual = 0.0;             // relative residual of the linear solve
  RegimeReport regime;               // diagnostics captured at solve time
  bool regime_checked = false;
};

/// Soft bodies: u_e(s_m) + sum_{j != m} g(s_m,s_j) C_j u_e(s_j) = u_0(s_m),
/// strengths Q_j = -C_j u_e(s_j).
DiscreteFieldSolution solve_dirichlet(const ParticleEnsemble& ensemble);

/// Hard bodies: per-body unknowns (u_e, grad u_e); the Laplacian in the
/// strength formula is closed with -k^2 u_e, and the coupling carries the
/// direction factor between body pairs.
DiscreteFieldSolution solve_neumann(const ParticleEnsemble& ensemble);

/// Third boundary condition: the Dirichlet system with C_j replaced by the
/// impedance weight h|S|/(1 + h|S|/C).
DiscreteFieldSolution solve_impedance(const ParticleEnsemble& ensemble);

/// u_e away from the bodies. Points closer than proximity_safety times the
/// body radius to some body are outside the model's validity; a warning is
/// printed once per call.
std::vector<Complex> evaluate_field(const DiscreteFieldSolution& solution,
                                    const ParticleEnsemble& ensemble,
                                    std::span<const Vec3> points,
                                    double proximity_safety = 10.0);

/// Far-field amplitude A(direction): r e^{-ikr} (u_e - u_0) as r -> infinity.
std::vector<Complex> far_field_amplitude(const DiscreteFieldSolution& solution,
                                         const ParticleEnsemble& ensemble,
                                         std::span<const Vec3> directions);

}  // namespace smallscat
