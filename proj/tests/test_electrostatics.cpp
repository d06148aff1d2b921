#include <doctest.h>

#include <cmath>
#include <numbers>

#include "smallscat/electrostatics.hpp"
#include "test_helpers.hpp"

using namespace smallscat;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("sphere capacitance approaches 4 pi") {
  SurfaceMesh mesh = generate_sphere(1.0, 2);
  const double c = capacitance(mesh);
  CHECK(std::abs(c - 4.0 * kPi) / (4.0 * kPi) < 0.02);

  SUBCASE("scaling the mesh by two doubles the capacitance exactly") {
    const double doubled = capacitance(mesh.scaled(2.0));
    CHECK(doubled == doctest::Approx(2.0 * c).epsilon(1e-14));
  }
  SUBCASE("capacitance scales linearly with radius") {
    const double c3 = capacitance(generate_sphere(3.0, 2));
    CHECK(c3 == doctest::Approx(3.0 * c).epsilon(1e-10));
  }
}

TEST_CASE("unit cube capacitance") {
  // Frozen from a refinement study of this collocation scheme (n = 8, 12, 16
  // panels per edge, Richardson extrapolated), which agrees with the known
  // value C = 4 pi * 0.6606782 = 8.302.
  SurfaceMesh cube = test_helpers::make_cube_mesh(0.5, 10);
  const double c = capacitance(cube);
  CHECK(std::abs(c - 8.302) / 8.302 < 0.02);
}

TEST_CASE("b tensors") {
  SurfaceMesh mesh = generate_sphere(1.0, 2);
  const double volume = mesh.volume;

  SUBCASE("order zero is V I exactly") {
    const Mat3 b0 = b_tensor(mesh, 0);
    CHECK((b0 - volume * Mat3::Identity()).norm() == 0.0);
  }
  SUBCASE("sphere first order is (4 pi / 3) V I") {
    const Mat3 b1 = b_tensor(generate_sphere(1.0, 3), 1);
    const double expected = 4.0 * kPi / 3.0 * (4.0 / 3.0 * kPi);
    for (int p = 0; p < 3; ++p) {
      CHECK(std::abs(b1(p, p) - expected) / expected < 0.02);
      for (int q = 0; q < 3; ++q)
        if (p != q) CHECK(std::abs(b1(p, q)) < 1e-6 * expected);
    }
  }
  SUBCASE("b1 is symmetric by construction") {
    const Mat3 b1 = b_tensor(generate_ellipsoid(Vec3(2, 1, 0.7), 2), 1);
    CHECK((b1 - b1.transpose()).norm() == 0.0);
  }
  SUBCASE("spheroid axes split and off-diagonals vanish") {
    // The icosphere image has the exact y/z degeneracy only in the limit;
    // panel placement breaks it at the quadrature-error level.
    const Mat3 b1 = b_tensor(generate_ellipsoid(Vec3(2, 1, 1), 3), 1);
    CHECK(b1(0, 0) != doctest::Approx(b1(1, 1)).epsilon(0.05));
    CHECK(b1(1, 1) == doctest::Approx(b1(2, 2)).epsilon(5e-3));
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q)
        if (p != q) CHECK(std::abs(b1(p, q)) < 1e-3 * b1.trace());
  }
  SUBCASE("scale covariance: b^(m) picks up t^3 for m <= 2") {
    const auto base = b_tensors(mesh, 2);
    const auto scaled = b_tensors(mesh.scaled(2.0), 2);
    for (int m = 0; m <= 2; ++m)
      CHECK((scaled[m] - 8.0 * base[m]).norm() <= 1e-13 * scaled[m].norm());
  }
}

TEST_CASE("alpha series") {
  SurfaceMesh mesh = generate_sphere(1.0, 3);
  const auto bs = b_tensors(mesh, 8);
  const double volume = mesh.volume;

  SUBCASE("gamma = 0 kills every term") {
    const Mat3 zero = alpha_from_b(bs, volume, 0.0, 4);
    CHECK(zero.norm() == 0.0);
  }
  SUBCASE("order one reproduces the closed form to machine precision") {
    const double gamma = 0.1;
    const Mat3 a1 = alpha_from_b(bs, volume, gamma, 1);
    const Mat3 expected = 2.0 * (gamma + gamma * gamma) * Mat3::Identity() -
                          gamma * gamma * bs[1] / (kPi * volume);
    CHECK((a1 - expected).norm() <= 1e-14 * expected.norm());
  }
  SUBCASE("sphere series approaches the analytic polarizability") {
    // gamma = -1 leans hardest on the iterated kernel, whose flat-panel
    // error is O(h); the acceptance suite tracks it at refinement 4.
    const double tol[3] = {0.01, 0.01, 0.06};
    const double gammas[3] = {0.3, -0.5, -1.0};
    for (int i = 0; i < 3; ++i) {
      const double analytic = 6.0 * gammas[i] / (3.0 - gammas[i]);
      const Mat3 a = alpha_from_b(bs, volume, gammas[i], 8);
      for (int p = 0; p < 3; ++p)
        CHECK(std::abs(a(p, p) - analytic) / std::abs(analytic) < tol[i]);
    }
  }
  SUBCASE("refinement sharpens the gamma = -1 limit") {
    const Mat3 coarse =
        alpha_series(generate_sphere(1.0, 2), -1.0, 6);
    const Mat3 fine = alpha_from_b(bs, volume, -1.0, 6);
    CHECK(std::abs(fine(0, 0) + 1.5) < std::abs(coarse(0, 0) + 1.5));
  }
  SUBCASE("sphere isotropy") {
    const Mat3 a = alpha_from_b(bs, volume, 0.4, 6);
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q)
        if (p != q) CHECK(std::abs(a(p, q)) < 1e-3 * a.norm());
  }
  SUBCASE("alpha is scale invariant") {
    SurfaceMesh small = generate_sphere(1.0, 2);
    const Mat3 a = alpha_series(small, 0.5, 3);
    const Mat3 a2 = alpha_series(small.scaled(2.0), 0.5, 3);
    CHECK((a - a2).norm() <= 1e-13 * a.norm());
  }
  SUBCASE("gamma = 1 and bad orders are rejected") {
    CHECK_THROWS_AS(alpha_from_b(bs, volume, 1.0, 2), Error);
    CHECK_THROWS_AS(alpha_from_b(bs, volume, 1.5, 2), Error);
    CHECK_THROWS_AS(alpha_from_b(bs, volume, 0.5, 0), Error);
  }
}

TEST_CASE("beta tensor") {
  SurfaceMesh mesh = generate_sphere(1.0, 2);
  const auto bs = b_tensors(mesh, 6);
  const double volume = mesh.volume;

  SUBCASE("first order equals -b1/(pi V) bit for bit") {
    const Mat3 beta1 = alpha_from_b(bs, volume, -1.0, 1);
    const Mat3 expected = -bs[1] / (kPi * volume);
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) CHECK(beta1(p, q) == expected(p, q));
  }
  SUBCASE("first order is -(4/3) I for the sphere") {
    const Mat3 beta1 = beta_tensor(generate_sphere(1.0, 3), 1);
    for (int p = 0; p < 3; ++p)
      CHECK(std::abs(beta1(p, p) + 4.0 / 3.0) / (4.0 / 3.0) < 0.02);
  }
  SUBCASE("high order approaches -1.5 I for the sphere") {
    SurfaceMesh fine = generate_sphere(1.0, 3);
    const Mat3 beta = alpha_from_b(b_tensors(fine, 8), fine.volume, -1.0, 8);
    for (int p = 0; p < 3; ++p)
      CHECK(std::abs(beta(p, p) + 1.5) / 1.5 < 0.06);
  }
  SUBCASE("beta_tensor and alpha_series(-1) are the same code path") {
    const Mat3 a = alpha_series(mesh, -1.0, 4);
    const Mat3 b = beta_tensor(mesh, 4);
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) CHECK(a(p, q) == b(p, q));
  }
}

TEST_CASE("rotation covariance of alpha") {
  SurfaceMesh egg = generate_ellipsoid(Vec3(2, 1, 1), 2);
  const Mat3 rot = Eigen::AngleAxisd(0.7, Vec3(1, 1, 2).normalized())
                       .toRotationMatrix();
  const Mat3 a = alpha_series(egg, 0.5, 3);
  const Mat3 a_rotated = alpha_series(egg.rotated(rot), 0.5, 3);
  const Mat3 expected = rot * a * rot.transpose();
  CHECK((a_rotated - expected).norm() < 2e-2 * expected.norm());
}

TEST_CASE("convergence estimate") {
  SurfaceMesh mesh = generate_sphere(1.0, 2);
  const auto bs = b_tensors(mesh, 8);
  const double volume = mesh.volume;

  SUBCASE("converging series lands in (0, 1)") {
    for (double gamma : {0.5, -1.0}) {
      const auto est = convergence_estimate(bs, volume, gamma);
      CHECK(est.ratio > 0.0);
      CHECK(est.ratio < 1.0);
    }
  }
  SUBCASE("gamma = 0 reports zero") {
    const auto est = convergence_estimate(bs, volume, 0.0);
    CHECK(est.ratio == 0.0);
    CHECK(est.reliable);
  }
  SUBCASE("needs at least three successive orders") {
    const auto few = b_tensors(mesh, 2);
    CHECK_THROWS_AS(convergence_estimate(few, volume, 0.5), Error);
  }
}

TEST_CASE("analyze_body bundles the pieces consistently") {
  SurfaceMesh mesh = generate_sphere(1.0, 2);
  PolarizabilityResult r = analyze_body(mesh, -0.5, 4);
  CHECK(r.capacitance > 0.0);
  CHECK(r.volume == doctest::Approx(mesh.volume));
  CHECK(r.area == doctest::Approx(mesh.total_area));
  CHECK(r.order == 4);
  CHECK(r.gamma == -0.5);
  CHECK(static_cast<int>(r.b_tensors.size()) >= 5);
  const Mat3 direct = alpha_from_b(r.b_tensors, r.volume, -0.5, 4);
  CHECK((r.alpha - direct).norm() == 0.0);
  CHECK(r.convergence_ratio > 0.0);
  CHECK(r.convergence_ratio < 1.0);
}
