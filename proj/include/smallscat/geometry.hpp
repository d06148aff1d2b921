#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smallscat/error.hpp"

namespace smallscat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Triangulated closed surface with outward orientation. Vertices and
/// triangle index triples are the primary data; normals, areas, centroids
/// and global totals are derived by make_mesh().
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  std::vector<Vec3> normals;    // unit, outward, per triangle
  std::vector<Vec3> centroids;  // per triangle
  std::vector<double> areas;    // per triangle
  double total_area = 0.0;
  double volume = 0.0;          // from the divergence theorem, > 0

  std::size_t triangle_count() const { return triangles.size(); }
  std::size_t vertex_count() const { return vertices.size(); }

  const Vec3& corner(std::size_t t, int c) const {
    return vertices[static_cast<std::size_t>(triangles[t][c])];
  }

  // Half the maximum pairwise vertex distance; diagnostic only.
  double body_radius() const;

  SurfaceMesh scaled(double factor) const;
  SurfaceMesh rotated(const Mat3& rotation) const;
};

/// Validates connectivity (closed, manifold, consistently oriented), fixes a
/// globally reversed orientation, and fills the derived per-triangle data.
/// Throws Error::validation with the offending edge/triangle on failure.
SurfaceMesh make_mesh(std::vector<Vec3> vertices,
                      std::vector<std::array<int, 3>> triangles,
                      const std::string& source = {});

/// Icosphere with 20 * 4^refinement triangles; every vertex at distance
/// `radius` from the origin.
SurfaceMesh generate_sphere(double radius, int refinement);

/// Axis-aligned affine image of the unit icosphere; normals are recomputed
/// from the mapped geometry.
SurfaceMesh generate_ellipsoid(const Vec3& semiaxes, int refinement);

/// OFF-style text format: `OFF`, then `nv nt 0`, then vertex and triangle
/// lines. `#` starts a comment. Orientation is fixed to outward on load.
SurfaceMesh load_mesh(const std::string& path);
void save_mesh(const SurfaceMesh& mesh, const std::string& path);

enum class KernelKind { newton, normal_derivative };
enum class PanelRule { centroid, three_point };

/// Quadrature nodes and weights on one triangle; weights sum to the area.
void panel_nodes(const SurfaceMesh& mesh, std::size_t t, PanelRule rule,
                 std::vector<Vec3>& points, std::vector<double>& weights);

/// Exact single-layer potential of a unit constant density on a flat
/// triangle: integral of 1/|p - x| over the triangle.
double triangle_potential(const Vec3& p, const Vec3& a, const Vec3& b,
                          const Vec3& c);

/// True when triangles i and j share at least one vertex index.
bool triangles_adjacent(const SurfaceMesh& mesh, std::size_t i, std::size_t j);

/// Integral over S x S of N_p(s) N_q(t) K(s,t), with K the Newton kernel
/// 1/|s-t| or its normal derivative at t. Same-triangle pairs vanish for the
/// derivative kernel; for the Newton kernel the inner integral over singular
/// and adjacent pairs is evaluated with triangle_potential.
double double_surface_integral(const SurfaceMesh& mesh, KernelKind kernel,
                               int p, int q,
                               PanelRule rule = PanelRule::centroid);

}  // namespace smallscat
