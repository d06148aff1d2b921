#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "smallscat/geometry.hpp"
#include "test_helpers.hpp"

using namespace smallscat;
using test_helpers::TempFile;

namespace {

constexpr double kPi = std::numbers::pi;

// Brute-force quadrature of the single-layer potential by uniform panel
// subdivision; independent of triangle_potential.
double potential_by_subdivision(const Vec3& p, const Vec3& a, const Vec3& b,
                                const Vec3& c, int levels) {
  struct Tri { Vec3 a, b, c; };
  std::vector<Tri> tris{{a, b, c}};
  for (int l = 0; l < levels; ++l) {
    std::vector<Tri> next;
    next.reserve(tris.size() * 4);
    for (const auto& t : tris) {
      Vec3 ab = 0.5 * (t.a + t.b), bc = 0.5 * (t.b + t.c), ca = 0.5 * (t.c + t.a);
      next.push_back({t.a, ab, ca});
      next.push_back({t.b, bc, ab});
      next.push_back({t.c, ca, bc});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  double sum = 0.0;
  for (const auto& t : tris) {
    const Vec3 cen = (t.a + t.b + t.c) / 3.0;
    const double area = 0.5 * (t.b - t.a).cross(t.c - t.a).norm();
    sum += area / (p - cen).norm();
  }
  return sum;
}

const char* kTetrahedron =
    "OFF\n"
    "4 4 0\n"
    "0 0 0\n"
    "1 0 0\n"
    "0 1 0\n"
    "0 0 1\n"
    "3 0 2 1\n"
    "3 0 1 3\n"
    "3 0 3 2\n"
    "3 1 2 3\n";

}  // namespace

TEST_CASE("icosphere construction") {
  SurfaceMesh base = generate_sphere(1.0, 0);
  CHECK(base.triangle_count() == 20);
  for (const auto& v : base.vertices)
    CHECK(std::abs(v.norm() - 1.0) < 1e-14);

  SurfaceMesh refined = generate_sphere(1.0, 3);
  CHECK(refined.triangle_count() == 20 * 64);
  CHECK(std::abs(refined.total_area - 4.0 * kPi) / (4.0 * kPi) < 0.005);

  SurfaceMesh big = generate_sphere(2.0, 3);
  const double expected = 4.0 / 3.0 * kPi * 8.0;
  CHECK(std::abs(big.volume - expected) / expected < 0.01);

  // Normals outward for a convex body.
  for (std::size_t t = 0; t < refined.triangle_count(); ++t)
    CHECK(refined.centroids[t].dot(refined.normals[t]) > 0.0);

  CHECK_THROWS_AS(generate_sphere(-1.0, 2), Error);
  CHECK_THROWS_AS(generate_sphere(1.0, -1), Error);
}

TEST_CASE("ellipsoid construction") {
  SurfaceMesh sphere = generate_sphere(1.0, 2);
  SurfaceMesh same = generate_ellipsoid(Vec3(1, 1, 1), 2);
  REQUIRE(same.vertex_count() == sphere.vertex_count());
  for (std::size_t i = 0; i < sphere.vertex_count(); ++i)
    CHECK((same.vertices[i] - sphere.vertices[i]).norm() == 0.0);

  SurfaceMesh stretched = generate_ellipsoid(Vec3(2, 1, 1), 3);
  const double expected = 4.0 / 3.0 * kPi * 2.0;
  CHECK(std::abs(stretched.volume - expected) / expected < 0.01);

  CHECK_NOTHROW(generate_ellipsoid(Vec3(1, 1, 0.5), 3));
  CHECK_THROWS_AS(generate_ellipsoid(Vec3(1, 0, 1), 2), Error);
}

TEST_CASE("off files round trip and validate") {
  TempFile tet(kTetrahedron);
  SurfaceMesh mesh = load_mesh(tet.path());
  CHECK(mesh.triangle_count() == 4);
  CHECK(mesh.volume > 0.0);
  CHECK(mesh.volume == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

  SUBCASE("reversed winding is fixed on load") {
    TempFile reversed(
        "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
        "3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n");
    SurfaceMesh fixed = load_mesh(reversed.path());
    CHECK(fixed.volume == doctest::Approx(mesh.volume).epsilon(1e-14));
  }
  SUBCASE("open surface is rejected with the edge named") {
    // Octahedron with one face removed.
    TempFile holed(
        "OFF\n6 7 0\n"
        "1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n"
        "3 0 2 4\n3 2 1 4\n3 1 3 4\n3 3 0 4\n3 2 0 5\n3 1 2 5\n3 3 1 5\n");
    CHECK_THROWS_WITH_AS(load_mesh(holed.path()),
                         doctest::Contains("open surface"), Error);
  }
  SUBCASE("non-manifold edge is rejected") {
    TempFile bad("OFF\n5 5 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 1\n"
                 "3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n3 1 2 4\n");
    CHECK_THROWS_WITH_AS(load_mesh(bad.path()),
                         doctest::Contains("non-manifold"), Error);
  }
  SUBCASE("inconsistent winding is rejected") {
    TempFile bad("OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
                 "3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 3 2\n");
    CHECK_THROWS_AS(load_mesh(bad.path()), Error);
  }
  SUBCASE("parse failures carry the location") {
    TempFile bad("OFF\n4 4 0\n0 0 banana\n");
    CHECK_THROWS_WITH_AS(load_mesh(bad.path()), doctest::Contains("banana"),
                         Error);
  }
  SUBCASE("save and reload") {
    SurfaceMesh sphere = generate_sphere(1.0, 1);
    TempFile target("");
    save_mesh(sphere, target.path());
    SurfaceMesh back = load_mesh(target.path());
    CHECK(back.triangle_count() == sphere.triangle_count());
    CHECK(back.volume == doctest::Approx(sphere.volume).epsilon(1e-14));
  }
}

TEST_CASE("quadrature weights sum to the area") {
  SurfaceMesh mesh = generate_sphere(1.0, 1);
  std::vector<Vec3> pts;
  std::vector<double> w;
  for (auto rule : {PanelRule::centroid, PanelRule::three_point}) {
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
      panel_nodes(mesh, t, rule, pts, w);
      for (double wi : w) total += wi;
    }
    CHECK(total == doctest::Approx(mesh.total_area).epsilon(1e-13));
  }
}

TEST_CASE("triangle potential matches independent oracles") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);

  SUBCASE("far point approaches area / distance") {
    const Vec3 p(40.0, -25.0, 60.0);
    const double area = 0.5;
    const double direct = potential_by_subdivision(p, a, b, c, 6);
    const double exact = triangle_potential(p, a, b, c);
    CHECK(exact == doctest::Approx(direct).epsilon(1e-8));
    CHECK(exact == doctest::Approx(area / (p - Vec3(1.0 / 3, 1.0 / 3, 0)).norm())
                       .epsilon(1e-3));
  }
  SUBCASE("generic off-plane point agrees with brute force") {
    const Vec3 p(0.3, 0.1, 0.8);
    const double direct = potential_by_subdivision(p, a, b, c, 9);
    CHECK(triangle_potential(p, a, b, c) ==
          doctest::Approx(direct).epsilon(1e-5));
  }
  SUBCASE("equilateral centroid has the closed-form value") {
    // Potential at the center of an equilateral triangle of side s is
    // sqrt(3) s ln(2 + sqrt(3)).
    for (double s : {1.0, 2.0}) {
      const Vec3 ea(0, 0, 0), eb(s, 0, 0), ec(s / 2, s * std::sqrt(3.0) / 2, 0);
      const Vec3 center = (ea + eb + ec) / 3.0;
      const double expected = std::sqrt(3.0) * s * std::log(2.0 + std::sqrt(3.0));
      CHECK(triangle_potential(center, ea, eb, ec) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("point on a vertex stays finite and positive") {
    const double v = triangle_potential(a, a, b, c);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
}

TEST_CASE("double surface integral with the Newton kernel") {
  // Unit sphere oracle: the l = 1 single-layer eigenvalue gives
  // (4 pi / 3) * V = (4 pi / 3)^2 = 17.5459...
  const double expected = std::pow(4.0 * kPi / 3.0, 2);
  SurfaceMesh mesh = generate_sphere(1.0, 3);
  const double value = double_surface_integral(mesh, KernelKind::newton, 0, 0);
  CHECK(std::abs(value - expected) / expected < 0.02);

  SUBCASE("off-axis components vanish by symmetry") {
    SurfaceMesh small = generate_sphere(1.0, 2);
    const double scale =
        double_surface_integral(small, KernelKind::newton, 0, 0);
    for (auto [p, q] : {std::pair{0, 1}, {0, 2}, {1, 2}})
      CHECK(std::abs(double_surface_integral(small, KernelKind::newton, p, q)) <
            1e-10 * scale);
  }
  SUBCASE("kernel symmetry within quadrature tolerance") {
    SurfaceMesh egg = generate_ellipsoid(Vec3(1.5, 1.0, 0.7), 2);
    const Mat3 r = Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized())
                       .toRotationMatrix();
    SurfaceMesh tilted = egg.rotated(r);
    const double pq =
        double_surface_integral(tilted, KernelKind::newton, 0, 1);
    const double qp =
        double_surface_integral(tilted, KernelKind::newton, 1, 0);
    const double scale =
        std::abs(double_surface_integral(tilted, KernelKind::newton, 0, 0));
    CHECK(std::abs(pq - qp) < 1e-3 * scale);
  }
  SUBCASE("refinement differences shrink monotonically") {
    const double i2 =
        double_surface_integral(generate_sphere(1.0, 2), KernelKind::newton, 0, 0);
    const double i3 = value;
    const double i4 =
        double_surface_integral(generate_sphere(1.0, 4), KernelKind::newton, 0, 0);
    CHECK(std::abs(i3 - i2) > std::abs(i4 - i3));
    CHECK(std::abs(i4 - expected) < std::abs(i3 - expected));
  }
  SUBCASE("scaling by t multiplies the integral by t^3") {
    SurfaceMesh small = generate_sphere(1.0, 2);
    const double base = double_surface_integral(small, KernelKind::newton, 0, 0);
    const double scaled =
        double_surface_integral(small.scaled(2.0), KernelKind::newton, 0, 0);
    CHECK(scaled == doctest::Approx(8.0 * base).epsilon(1e-13));
  }
}

TEST_CASE("double surface integral with the normal-derivative kernel") {
  // On the unit sphere psi(t, s) = -1/(2 r_st), so the integral approaches
  // -(1/2) of the Newton-kernel value. Flat panels miss the curvature-borne
  // diagonal mass, an O(h) effect, so the tolerance tracks the refinement.
  SurfaceMesh coarse = generate_sphere(1.0, 2);
  SurfaceMesh fine = generate_sphere(1.0, 3);
  const double newton = double_surface_integral(fine, KernelKind::newton, 0, 0);
  const double psi_coarse =
      double_surface_integral(coarse, KernelKind::normal_derivative, 0, 0);
  const double psi_fine =
      double_surface_integral(fine, KernelKind::normal_derivative, 0, 0);
  const double target = -0.5 * newton;
  CHECK(std::abs(psi_fine - target) < std::abs(psi_coarse - target));
  CHECK(psi_fine == doctest::Approx(target).epsilon(0.05));
}

TEST_CASE("body radius reports half the diameter") {
  SurfaceMesh mesh = generate_sphere(2.0, 1);
  CHECK(mesh.body_radius() == doctest::Approx(2.0).epsilon(1e-3));
}
