#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smallscat/ensemble.hpp"

namespace smallscat {

using Complex = std::complex<double>;

struct ContinuumOptions {
  double tolerance = 1e-10;
  int dense_limit = 4096;  // direct solve up to this many complex unknowns
  enum class Solver { automatic, dense, iterative };
  Solver solver = Solver::automatic;
  int gmres_restart = 60;
  int max_iterations = 4000;
};

enum class ContinuumKind { soft, impedance, hard };

/// Nystrom solution on the density grid: cell centers are the nodes, cell
/// volumes the weights, and the weakly singular self-cell is integrated over
/// the equal-volume ball.
struct GridFieldSolution {
  ContinuumKind kind = ContinuumKind::soft;
  Grid3 grid;
  double k = 1.0;
  Vec3 incident = Vec3(0, 0, 1);
  Eigen::VectorXcd u;        // per node
  Eigen::Matrix3Xcd grad_u;  // hard solver only, 3 x N
  double residual = 0.0;
  int iterations = 0;        // 0 for the direct path
  std::string method;        // "dense-lu" or "gmres-fft"
  std::string closure;       // hard solver: the Laplacian substitution
};

/// Soft scatterers: u = u_0 - G[C u].
GridFieldSolution solve_soft(const DensityFields& fields, double k,
                             const Vec3& nu, const ContinuumOptions& = {});

/// Impedance scatterers: identical machinery with the weight density b(y).
GridFieldSolution solve_impedance_continuum(const DensityFields& fields,
                                            double k, const Vec3& nu,
                                            const ContinuumOptions& = {});

/// Hard scatterers: coupled equations for u and its gradient, with the
/// direction-dependent dipole kernel and the Laplacian closed as -k^2 u.
GridFieldSolution solve_hard(const DensityFields& fields, double k,
                             const Vec3& nu, const ContinuumOptions& = {});

/// || (lap_h + k^2 - C) u || / || k^2 u || over interior nodes with
/// second-order central differences. Needs >= 5 nodes per axis.
double schrodinger_residual(const GridFieldSolution& solution,
                            const DensityFields& fields, double k);

/// Helmholtz-only variant of the residual (no potential term); reported as a
/// closure diagnostic for the hard solver.
double helmholtz_residual(const GridFieldSolution& solution, double k);

/// Field at arbitrary points from the representation formula. Inside a
/// distance r_ball of a node the kernel is clamped to its cell average.
std::vector<Complex> evaluate_continuum_field(const GridFieldSolution& solution,
                                              const DensityFields& fields,
                                              std::span<const Vec3> points);

}  // namespace smallscat
