#include "smallscat/electrostatics.hpp"

#include <cmath>
#include <numbers>

#include "smallscat/parallel.hpp"

namespace smallscat {

namespace {

constexpr double kPi = std::numbers::pi;

// A_ij = integral of 1/|c_i - t| over panel j: exact in the near field,
// centroid rule once the separation clears a few panel diameters.
Eigen::MatrixXd single_layer_matrix(const SurfaceMesh& mesh) {
  const std::size_t n = mesh.triangle_count();
  std::vector<double> reach(n);
  for (std::size_t t = 0; t < n; ++t) {
    double r = 0.0;
    for (int c = 0; c < 3; ++c)
      r = std::max(r, (mesh.corner(t, c) - mesh.centroids[t]).norm());
    reach[t] = r;
  }
  Eigen::MatrixXd a(n, n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& x = mesh.centroids[i];
      for (std::size_t j = 0; j < n; ++j) {
        const double dist = (x - mesh.centroids[j]).norm();
        double value;
        if (dist > 6.0 * (reach[i] + reach[j]))
          value = mesh.areas[j] / dist;
        else
          value = triangle_potential(x, mesh.corner(j, 0), mesh.corner(j, 1),
                                     mesh.corner(j, 2));
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
      }
    }
  });
  return a;
}

// Psi_ij = integral over panel j of N_i . (t - c_i)/|t - c_i|^3 dt.
// The source panel itself contributes nothing (in-plane direction).
Eigen::MatrixXd normal_derivative_matrix(const SurfaceMesh& mesh,
                                         PanelRule rule) {
  const std::size_t n = mesh.triangle_count();
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(n));
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<Vec3> pts;
    std::vector<double> w;
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& x = mesh.centroids[i];
      const Vec3& nx = mesh.normals[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        double acc = 0.0;
        if (triangles_adjacent(mesh, i, j)) {
          // Peaked near the shared edge/vertex: integrate on a 4x refined panel.
          struct Tri { Vec3 a, b, c; };
          Tri stack[32];
          int depth[32];
          int top = 0;
          stack[top] = {mesh.corner(j, 0), mesh.corner(j, 1), mesh.corner(j, 2)};
          depth[top++] = 0;
          while (top > 0) {
            Tri t = stack[--top];
            int d = depth[top];
            if (d == 2) {
              Vec3 cen = (t.a + t.b + t.c) / 3.0;
              double area = 0.5 * (t.b - t.a).cross(t.c - t.a).norm();
              Vec3 diff = cen - x;
              double r = diff.norm();
              acc += area * nx.dot(diff) / (r * r * r);
              continue;
            }
            Vec3 ab = 0.5 * (t.a + t.b), bc = 0.5 * (t.b + t.c),
                 ca = 0.5 * (t.c + t.a);
            stack[top] = {t.a, ab, ca}; depth[top++] = d + 1;
            stack[top] = {t.b, bc, ab}; depth[top++] = d + 1;
            stack[top] = {t.c, ca, bc}; depth[top++] = d + 1;
            stack[top] = {ab, bc, ca}; depth[top++] = d + 1;
          }
        } else {
          panel_nodes(mesh, j, rule, pts, w);
          for (std::size_t g = 0; g < pts.size(); ++g) {
            Vec3 diff = pts[g] - x;
            double r = diff.norm();
            acc += w[g] * nx.dot(diff) / (r * r * r);
          }
        }
        psi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
      }
    }
  });
  return psi;
}

}  // namespace

double capacitance(const SurfaceMesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.triangle_count());
  Eigen::MatrixXd a = single_layer_matrix(mesh) / (4.0 * kPi);
  Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  Eigen::VectorXd sigma = lu.solve(rhs);
  if (!sigma.allFinite())
    throw Error::numerical("capacitance: singular collocation matrix");
  double residual = (a * sigma - rhs).norm() / rhs.norm();
  if (!(residual < 1e-8))
    throw Error::numerical("capacitance: collocation solve failed, residual " +
                           std::to_string(residual));
  double q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    q += sigma(i) * mesh.areas[static_cast<std::size_t>(i)];
  return q;
}

std::vector<Mat3> b_tensors(const SurfaceMesh& mesh, int max_order,
                            PanelRule rule) {
  if (max_order < 0)
    throw Error::validation("b_tensors: order must be >= 0");
  std::vector<Mat3> out;
  out.push_back(mesh.volume * Mat3::Identity());
  if (max_order == 0) return out;

  const auto n = static_cast<Eigen::Index>(mesh.triangle_count());
  Eigen::MatrixXd layer = single_layer_matrix(mesh);
  Eigen::MatrixXd psi;
  if (max_order >= 2) psi = normal_derivative_matrix(mesh, rule);

  Eigen::MatrixXd normals(n, 3);          // N_q at panel centroids
  Eigen::MatrixXd weighted_normals(n, 3); // area-weighted N_p
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(i);
    normals.row(i) = mesh.normals[t].transpose();
    weighted_normals.row(i) = (mesh.areas[t] * mesh.normals[t]).transpose();
  }

  Eigen::MatrixXd chain = normals;  // Psi^(m-1) applied to the normal field
  for (int m = 1; m <= max_order; ++m) {
    Mat3 b = weighted_normals.transpose() * (layer * chain);
    if (m == 1) {
      const Mat3 raw = b;  // the kernel is symmetric; drop quadrature skew
      b = 0.5 * (raw + raw.transpose());
    }
    out.push_back(b);
    if (m < max_order) chain = psi * chain;
  }
  return out;
}

Mat3 b_tensor(const SurfaceMesh& mesh, int m, PanelRule rule) {
  return b_tensors(mesh, m, rule).back();
}

Mat3 alpha_from_b(const std::vector<Mat3>& b, double volume, double gamma,
                  int n) {
  if (n < 1) throw Error::validation("alpha series: order must be >= 1");
  if (!(gamma >= -1.0 && gamma < 1.0))
    throw Error::validation(
        "alpha series: gamma must lie in [-1, 1); gamma = 1 is outside the "
        "series' validity");
  if (static_cast<int>(b.size()) < n + 1)
    throw Error::validation("alpha series: need b tensors up to the order");

  const double gamma_high = std::pow(gamma, n + 2);
  Mat3 alpha = Mat3::Zero();
  double pi_pow = 1.0;   // pi^m
  double sign = 1.0;     // (-1)^m
  for (int m = 0; m <= n; ++m) {
    const double c = (gamma_high - std::pow(gamma, m + 1)) / (gamma - 1.0);
    const double two_pow = std::ldexp(1.0, 1 - m);  // 2^(1-m)
    alpha += (sign * two_pow * c * b[static_cast<std::size_t>(m)]) /
             (volume * pi_pow);
    pi_pow *= kPi;
    sign = -sign;
  }
  return alpha;
}

Mat3 alpha_series(const SurfaceMesh& mesh, double gamma, int n,
                  PanelRule rule) {
  return alpha_from_b(b_tensors(mesh, n, rule), mesh.volume, gamma, n);
}

Mat3 beta_tensor(const SurfaceMesh& mesh, int n, PanelRule rule) {
  return alpha_series(mesh, -1.0, n, rule);
}

ConvergenceEstimate convergence_estimate(const std::vector<Mat3>& b,
                                         double volume, double gamma) {
  const int nmax = static_cast<int>(b.size()) - 1;
  if (nmax < 3)
    throw Error::validation(
        "convergence estimate: need at least 3 successive orders");
  std::vector<double> diffs;
  Mat3 prev = alpha_from_b(b, volume, gamma, 1);
  for (int n = 2; n <= nmax; ++n) {
    Mat3 cur = alpha_from_b(b, volume, gamma, n);
    diffs.push_back((cur - prev).norm());
    prev = cur;
  }
  ConvergenceEstimate est;
  bool all_zero = true;
  for (double d : diffs) all_zero = all_zero && d < 1e-300;
  if (all_zero) {
    est.ratio = 0.0;
    est.reliable = true;
    return est;
  }
  est.reliable = true;
  for (std::size_t i = 1; i < diffs.size(); ++i)
    if (diffs[i] >= diffs[i - 1]) est.reliable = false;
  const double first = diffs.front(), last = diffs.back();
  if (first < 1e-300) {
    est.ratio = 0.0;
    est.reliable = false;
    return est;
  }
  est.ratio = std::pow(last / first,
                       1.0 / static_cast<double>(diffs.size() - 1));
  return est;
}

PolarizabilityResult analyze_body(const SurfaceMesh& mesh, double gamma,
                                  int order, PanelRule rule) {
  if (order < 1) throw Error::validation("analyze_body: order must be >= 1");
  PolarizabilityResult r;
  r.volume = mesh.volume;
  r.area = mesh.total_area;
  r.gamma = gamma;
  r.order = order;
  r.capacitance = capacitance(mesh);
  r.b_tensors = b_tensors(mesh, std::max(order, 4), rule);
  r.alpha = alpha_from_b(r.b_tensors, r.volume, gamma, order);
  r.beta = alpha_from_b(r.b_tensors, r.volume, -1.0, order);
  if (static_cast<int>(r.b_tensors.size()) - 1 >= 3) {
    auto est = convergence_estimate(r.b_tensors, r.volume,
                                    gamma != 0.0 ? gamma : -1.0);
    r.convergence_ratio = est.ratio;
    r.convergence_reliable = est.reliable;
  }
  return r;
}

}  // namespace smallscat
