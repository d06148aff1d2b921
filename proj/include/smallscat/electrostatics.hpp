#pragma once

#include <vector>

#include <Eigen/Dense>

#include "smallscat/geometry.hpp"

namespace smallscat {

/// Shape-derived scattering constants of one body: electrostatic capacitance
/// (eps0 = 1, so a sphere of radius a has capacitance 4*pi*a) and the
/// polarizability tensors built from the iterated surface-kernel series.
struct PolarizabilityResult {
  double capacitance = 0.0;
  double volume = 0.0;
  double area = 0.0;
  std::vector<Mat3> b_tensors;  // b^(0) .. b^(order)
  Mat3 alpha = Mat3::Zero();    // alpha^(order)(gamma)
  Mat3 beta = Mat3::Zero();     // alpha^(order)(-1)
  double gamma = 0.0;
  int order = 0;
  double convergence_ratio = 0.0;
  bool convergence_reliable = false;
};

struct ConvergenceEstimate {
  double ratio = 0.0;     // fitted geometric decay of successive differences
  bool reliable = false;  // false when the differences are not monotone
};

/// Capacitance of the body as a perfect conductor: collocation at panel
/// centroids with piecewise-constant density and exact panel potentials.
double capacitance(const SurfaceMesh& mesh);

/// b^(0) = V*I; b^(1) is the Newton-kernel double surface integral of the
/// normal components; higher orders apply the normal-derivative kernel
/// operator m-1 times before closing with the Newton layer.
std::vector<Mat3> b_tensors(const SurfaceMesh& mesh, int max_order,
                            PanelRule rule = PanelRule::centroid);
Mat3 b_tensor(const SurfaceMesh& mesh, int m,
              PanelRule rule = PanelRule::centroid);

/// Order-n truncation of the polarizability series at material contrast
/// gamma = (eps - eps0)/(eps + eps0), -1 <= gamma < 1.
Mat3 alpha_from_b(const std::vector<Mat3>& b, double volume, double gamma,
                  int n);
Mat3 alpha_series(const SurfaceMesh& mesh, double gamma, int n,
                  PanelRule rule = PanelRule::centroid);

/// Magnetic polarizability: the same series evaluated at gamma = -1.
Mat3 beta_tensor(const SurfaceMesh& mesh, int n,
                 PanelRule rule = PanelRule::centroid);

/// Fits q in ||alpha^(n+1) - alpha^(n)|| ~ q^n from the available orders.
/// Needs b^(0..n) with n >= 3; gamma = 0 reports ratio 0.
ConvergenceEstimate convergence_estimate(const std::vector<Mat3>& b,
                                         double volume, double gamma);

/// One-stop analysis used by the ensemble builders and the CLI.
PolarizabilityResult analyze_body(const SurfaceMesh& mesh, double gamma,
                                  int order,
                                  PanelRule rule = PanelRule::centroid);

}  // namespace smallscat
