#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "smallscat/acoustic_discrete.hpp"
#include "test_helpers.hpp"

using namespace smallscat;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

BodyProperties sphere_body(double radius, double h = 0.0) {
  BodyProperties b;
  b.capacitance = 4.0 * kPi * radius;
  b.volume = 4.0 / 3.0 * kPi * radius * radius * radius;
  b.area = 4.0 * kPi * radius * radius;
  b.radius = radius;
  b.beta = -1.5 * Mat3::Identity();
  b.h = h;
  return b;
}

ParticleEnsemble make_ensemble(std::vector<Vec3> positions, double k,
                               BoundaryKind kind, double body_radius = 0.01,
                               double h = 0.0) {
  ParticleEnsemble e;
  e.positions = std::move(positions);
  e.bodies.assign(e.positions.size(), sphere_body(body_radius, h));
  e.boundary = kind;
  e.k = k;
  e.incident = Vec3(0, 0, 1);
  return e;
}

ParticleEnsemble random_ensemble(int count, double k, BoundaryKind kind,
                                 std::uint64_t seed, double radius = 0.01,
                                 double h = 0.0) {
  ParticleEnsemble e = sample_ensemble(Box{Vec3(0, 0, 0), Vec3(10, 10, 10)},
                                       count, 1.0, sphere_body(radius, h),
                                       seed);
  e.boundary = kind;
  e.k = k;
  e.incident = Vec3(0, 0, 1);
  return e;
}

}  // namespace

TEST_CASE("dirichlet solver") {
  SUBCASE("no bodies leaves the incident wave") {
    ParticleEnsemble e = make_ensemble({}, 1.0, BoundaryKind::dirichlet);
    DiscreteFieldSolution sol = solve_dirichlet(e);
    CHECK(sol.u.size() == 0);
    const Vec3 x(0.3, -0.2, 0.9);
    auto vals = evaluate_field(sol, e, std::vector<Vec3>{x});
    CHECK(vals[0] == incident_wave(1.0, e.incident, x));
  }
  SUBCASE("one body sees the bare incident wave") {
    const Vec3 s(1.0, 2.0, 3.0);
    ParticleEnsemble e = make_ensemble({s}, 0.5, BoundaryKind::dirichlet);
    DiscreteFieldSolution sol = solve_dirichlet(e);
    const Complex u0 = incident_wave(0.5, e.incident, s);
    CHECK(std::abs(sol.u(0) - u0) < 1e-14);
    CHECK(std::abs(sol.charge(0) + e.bodies[0].capacitance * u0) < 1e-14);

    // Field at distance r: u0(x) - exp(ikr)/(4 pi r) C u0(s).
    const Vec3 x = s + Vec3(0, 0, 2.5);
    auto vals = evaluate_field(sol, e, std::vector<Vec3>{x});
    const Complex expected =
        incident_wave(0.5, e.incident, x) -
        std::exp(kI * (0.5 * 2.5)) / (4.0 * kPi * 2.5) *
            e.bodies[0].capacitance * u0;
    CHECK(std::abs(vals[0] - expected) < 1e-14);
  }
  SUBCASE("two bodies match an independent 2x2 solve") {
    const Vec3 s1(2.0, 1.0, -1.5), s2(4.5, 3.0, 2.0);
    const double k = 0.9;
    ParticleEnsemble e = make_ensemble({s1, s2}, k, BoundaryKind::dirichlet,
                                       0.05);
    e.bodies[1].capacitance *= 1.7;
    DiscreteFieldSolution sol = solve_dirichlet(e);

    const Complex g12 = greens(k, s1, s2), g21 = greens(k, s2, s1);
    const double c1 = e.bodies[0].capacitance, c2 = e.bodies[1].capacitance;
    const Complex u01 = incident_wave(k, e.incident, s1);
    const Complex u02 = incident_wave(k, e.incident, s2);
    const Complex det = 1.0 - g12 * g21 * c1 * c2;
    const Complex u1 = (u01 - g12 * c2 * u02) / det;
    const Complex u2 = (u02 - g21 * c1 * u01) / det;
    CHECK(std::abs(sol.u(0) - u1) < 1e-12 * std::abs(u1));
    CHECK(std::abs(sol.u(1) - u2) < 1e-12 * std::abs(u2));
  }
  SUBCASE("scattered field decays like 1/r") {
    ParticleEnsemble e = random_ensemble(8, 1.0, BoundaryKind::dirichlet, 21);
    DiscreteFieldSolution sol = solve_dirichlet(e);
    const Vec3 dir = Vec3(1, 2, 0.5).normalized();
    const Vec3 center(5, 5, 5);
    const double r = 1000.0;
    auto vals = evaluate_field(
        sol, e, std::vector<Vec3>{center + r * dir, center + 2 * r * dir});
    const Complex d1 = vals[0] - incident_wave(1.0, e.incident, center + r * dir);
    const Complex d2 =
        vals[1] - incident_wave(1.0, e.incident, center + 2 * r * dir);
    CHECK(std::abs(d1) / std::abs(d2) == doctest::Approx(2.0).epsilon(0.01));
  }
  SUBCASE("wrong boundary kind or coincident bodies are rejected") {
    ParticleEnsemble wrong = make_ensemble({Vec3(0, 0, 0)}, 1.0,
                                           BoundaryKind::neumann);
    CHECK_THROWS_AS(solve_dirichlet(wrong), Error);
    ParticleEnsemble dup = make_ensemble(
        {Vec3(1, 1, 1), Vec3(1, 1, 1)}, 1.0, BoundaryKind::dirichlet);
    CHECK_THROWS_AS(solve_dirichlet(dup), Error);
  }
}

TEST_CASE("impedance solver") {
  SUBCASE("h = 0 decouples the bodies") {
    ParticleEnsemble e = make_ensemble({Vec3(1, 1, 1), Vec3(4, 4, 4)}, 0.8,
                                       BoundaryKind::impedance, 0.05, 0.0);
    DiscreteFieldSolution sol = solve_impedance(e);
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(sol.u(j) -
                     incident_wave(0.8, e.incident, e.positions[j])) < 1e-14);
      CHECK(std::abs(sol.charge(j)) == 0.0);
    }
  }
  SUBCASE("h to infinity matches the dirichlet solve") {
    ParticleEnsemble hard =
        random_ensemble(12, 0.6, BoundaryKind::impedance, 31, 0.05, 1e12);
    DiscreteFieldSolution imp = solve_impedance(hard);
    ParticleEnsemble soft = hard;
    soft.boundary = BoundaryKind::dirichlet;
    DiscreteFieldSolution dir = solve_dirichlet(soft);
    CHECK((imp.u - dir.u).norm() / dir.u.norm() < 1e-6);
  }
}

TEST_CASE("neumann solver") {
  const double k = 0.75;

  SUBCASE("no bodies leaves the incident wave and its gradient") {
    ParticleEnsemble e = make_ensemble({}, k, BoundaryKind::neumann);
    DiscreteFieldSolution sol = solve_neumann(e);
    CHECK(sol.u.size() == 0);
  }
  SUBCASE("one body carries the plane-wave values") {
    const Vec3 s(0.5, -1.0, 2.0);
    ParticleEnsemble e = make_ensemble({s}, k, BoundaryKind::neumann, 0.05);
    DiscreteFieldSolution sol = solve_neumann(e);
    const Complex u0 = incident_wave(k, e.incident, s);
    CHECK(std::abs(sol.u(0) - u0) < 1e-14);
    for (int p = 0; p < 3; ++p)
      CHECK(std::abs(sol.grad_u(p, 0) - kI * k * e.incident(p) * u0) < 1e-14);

    // Far-field strength toward direction n is -k^2 V u0 (1 + n . beta nu).
    const double volume = e.bodies[0].volume;
    for (const Vec3& n : {Vec3(0, 0, 1), Vec3(1, 0, 0),
                          Vec3(1, 1, 1).normalized()}) {
      auto amp = far_field_amplitude(sol, e, std::vector<Vec3>{n});
      const Complex expected = std::exp(-kI * (k * n.dot(s))) / (4.0 * kPi) *
                               (-k * k * volume * u0 *
                                (1.0 + (n.transpose() * e.bodies[0].beta *
                                        e.incident)(0)));
      CHECK(std::abs(amp[0] - expected) < 1e-13 * std::abs(expected));
    }
    // Isotropic beta = -1.5 I in the forward direction gives +0.5 k^2 V u0.
    auto forward = far_field_amplitude(sol, e, std::vector<Vec3>{e.incident});
    const Complex q_forward = forward[0] * 4.0 * kPi *
                              std::exp(kI * (k * e.incident.dot(s)));
    CHECK(std::abs(q_forward - 0.5 * k * k * volume * u0) <
          1e-13 * std::abs(q_forward));
  }
  SUBCASE("anisotropic bodies scatter anisotropically") {
    ParticleEnsemble e = make_ensemble({Vec3(1, 1, 1)}, k,
                                       BoundaryKind::neumann, 0.05);
    e.bodies[0].beta = Vec3(-1.2, -1.8, -0.9).asDiagonal();
    DiscreteFieldSolution sol = solve_neumann(e);
    auto amps = far_field_amplitude(
        sol, e, std::vector<Vec3>{Vec3(1, 0, 0), Vec3(0, 0, 1)});
    CHECK(std::abs(amps[0] - amps[1]) > 1e-6 * std::abs(amps[1]));
  }
  SUBCASE("dirichlet amplitudes dominate neumann by (ka)^2") {
    const double ka = 0.01;
    ParticleEnsemble soft = make_ensemble({Vec3(0, 0, 0)}, ka,
                                          BoundaryKind::dirichlet, 1.0);
    DiscreteFieldSolution dir = solve_dirichlet(soft);
    ParticleEnsemble hard = soft;
    hard.boundary = BoundaryKind::neumann;
    DiscreteFieldSolution neu = solve_neumann(hard);
    double q_neumann = 0.0;
    for (const Vec3& n : {Vec3(0, 0, 1), Vec3(0, 0, -1), Vec3(1, 0, 0),
                          Vec3(0, 1, 0), Vec3(1, 1, 1).normalized()}) {
      auto amp = far_field_amplitude(neu, hard, std::vector<Vec3>{n});
      q_neumann = std::max(q_neumann, std::abs(amp[0]) * 4.0 * kPi);
    }
    const double q_dirichlet = std::abs(dir.charge(0));
    CHECK(q_neumann / q_dirichlet < 10.0 * ka * ka);
  }
}

TEST_CASE("far-field reciprocity for dirichlet ensembles") {
  for (std::uint64_t seed : {7ull, 8ull, 9ull}) {
    ParticleEnsemble e = random_ensemble(5, 1.1, BoundaryKind::dirichlet, seed,
                                         0.03);
    const Vec3 nu = Vec3(0.3, -0.4, 0.86).normalized();
    const Vec3 nhat = Vec3(-0.7, 0.1, 0.7).normalized();
    e.incident = nu;
    DiscreteFieldSolution forward = solve_dirichlet(e);
    auto a_forward = far_field_amplitude(forward, e, std::vector<Vec3>{nhat});

    ParticleEnsemble back = e;
    back.incident = -nhat;
    DiscreteFieldSolution reverse = solve_dirichlet(back);
    auto a_reverse =
        far_field_amplitude(reverse, back, std::vector<Vec3>{-nu});
    CHECK(std::abs(a_forward[0] - a_reverse[0]) <
          1e-6 * std::abs(a_forward[0]));
  }
}

TEST_CASE("far field matches the large-radius limit") {
  // Bodies near the origin so the quadratic phase k s^2 / (2r) stays small.
  ParticleEnsemble e = make_ensemble(
      {Vec3(1.0, 0.5, -0.8), Vec3(-1.2, 0.7, 0.9)}, 1.0,
      BoundaryKind::dirichlet, 0.05);
  DiscreteFieldSolution sol = solve_dirichlet(e);
  const Vec3 dir = Vec3(0.2, 0.3, 0.933).normalized();
  const double r = 1000.0 * 2.0 * kPi;  // 1000 wavelengths
  const Vec3 x = r * dir;
  auto field = evaluate_field(sol, e, std::vector<Vec3>{x});
  auto amp = far_field_amplitude(sol, e, std::vector<Vec3>{dir});
  const Complex extrapolated =
      (field[0] - incident_wave(1.0, e.incident, x)) * r *
      std::exp(-kI * (1.0 * r));
  CHECK(std::abs(extrapolated - amp[0]) < 1e-3 * std::abs(amp[0]));
}

TEST_CASE("removing one body perturbs the far field linearly in C") {
  ParticleEnsemble e = make_ensemble(
      {Vec3(2, 2, 2), Vec3(7, 6, 5), Vec3(4, 8, 3)}, 0.9,
      BoundaryKind::dirichlet, 0.05);
  const Vec3 x(50, 40, 60);

  auto removal_delta = [&](double c_last) {
    ParticleEnsemble full = e;
    full.bodies[2].capacitance = c_last;
    DiscreteFieldSolution with = solve_dirichlet(full);
    auto u_with = evaluate_field(with, full, std::vector<Vec3>{x});
    ParticleEnsemble reduced = full;
    reduced.positions.pop_back();
    reduced.bodies.pop_back();
    DiscreteFieldSolution without = solve_dirichlet(reduced);
    auto u_without = evaluate_field(without, reduced, std::vector<Vec3>{x});
    return std::abs(u_with[0] - u_without[0]);
  };

  const double c = e.bodies[2].capacitance;
  const double d_full = removal_delta(c);
  const double d_half = removal_delta(c / 2.0);
  CHECK(d_full / d_half == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("larger systems stay solvable with tiny residuals") {
  ParticleEnsemble e = sample_ensemble(Box{Vec3(0, 0, 0), Vec3(10, 10, 10)},
                                       400, 0.5, sphere_body(0.02), 51);
  e.boundary = BoundaryKind::dirichlet;
  e.k = 0.8;
  e.incident = Vec3(0, 0, 1);
  DiscreteFieldSolution sol = solve_dirichlet(e);
  CHECK(sol.residual < 1e-10);
  CHECK(sol.regime_checked);
  CHECK(sol.regime.pass());
}
