#include "smallscat/acoustic_discrete.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "smallscat/parallel.hpp"

namespace smallscat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kImag{0.0, 1.0};

void validate_common(const ParticleEnsemble& e) {
  if (!(e.k > 0.0)) throw Error::validation("solver: wavenumber k must be > 0");
  if (std::abs(e.incident.norm() - 1.0) > 1e-9)
    throw Error::validation("solver: incident direction must be a unit vector");
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = i + 1; j < e.size(); ++j)
      if ((e.positions[i] - e.positions[j]).norm() < 1e-14)
        throw Error::validation("solver: coincident body positions " +
                                std::to_string(i) + " and " + std::to_string(j));
}

RegimeReport try_regime(const ParticleEnsemble& e, WaveMode mode, bool& checked) {
  checked = false;
  if (e.size() == 0) return {};
  RegimeReport r = check_regime(e, mode);
  checked = true;
  if (!r.pass())
    std::fprintf(stderr, "smallscat: regime warning: %s\n", r.summary().c_str());
  return r;
}

// Shared assembly for the soft and impedance systems, which differ only in
// the per-body coupling strength.
DiscreteFieldSolution solve_monopole(const ParticleEnsemble& e,
                                     const std::vector<double>& strength,
                                     BoundaryKind kind) {
  DiscreteFieldSolution sol;
  sol.boundary = kind;
  sol.k = e.k;
  sol.incident = e.incident;
  sol.regime = try_regime(e, WaveMode::acoustic, sol.regime_checked);

  const auto n = static_cast<Eigen::Index>(e.size());
  if (n == 0) return sol;

  Eigen::MatrixXcd system = Eigen::MatrixXcd::Identity(n, n);
  parallel_for(e.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m)
      for (std::size_t j = 0; j < e.size(); ++j) {
        if (j == m) continue;
        system(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
            greens(e.k, e.positions[m], e.positions[j]) * strength[j];
      }
  });

  Eigen::VectorXcd rhs(n);
  for (Eigen::Index m = 0; m < n; ++m)
    rhs(m) = incident_wave(e.k, e.incident, e.positions[static_cast<std::size_t>(m)]);

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system);
  sol.u = lu.solve(rhs);
  if (!sol.u.allFinite())
    throw Error::numerical("discrete solve: singular system");
  sol.residual = (system * sol.u - rhs).norm() / rhs.norm();
  if (!(sol.residual < 1e-10))
    throw Error::numerical("discrete solve: residual " +
                           std::to_string(sol.residual) + " exceeds 1e-10");

  sol.charge.resize(n);
  for (Eigen::Index j = 0; j < n; ++j)
    sol.charge(j) = -strength[static_cast<std::size_t>(j)] * sol.u(j);
  return sol;
}

}  // namespace

Complex greens(double k, const Vec3& x, const Vec3& y) {
  const double r = (x - y).norm();
  return std::exp(kImag * (k * r)) / (4.0 * kPi * r);
}

Complex incident_wave(double k, const Vec3& nu, const Vec3& x) {
  return std::exp(kImag * (k * nu.dot(x)));
}

DiscreteFieldSolution solve_dirichlet(const ParticleEnsemble& e) {
  if (e.boundary != BoundaryKind::dirichlet)
    throw Error::validation("solve_dirichlet: ensemble boundary kind mismatch");
  validate_common(e);
  std::vector<double> strength(e.size());
  for (std::size_t j = 0; j < e.size(); ++j) {
    if (!(e.bodies[j].capacitance > 0.0))
      throw Error::validation("solve_dirichlet: body " + std::to_string(j) +
                              " has non-positive capacitance");
    strength[j] = e.bodies[j].capacitance;
  }
  return solve_monopole(e, strength, BoundaryKind::dirichlet);
}

DiscreteFieldSolution solve_impedance(const ParticleEnsemble& e) {
  if (e.boundary != BoundaryKind::impedance)
    throw Error::validation("solve_impedance: ensemble boundary kind mismatch");
  validate_common(e);
  std::vector<double> strength(e.size());
  for (std::size_t j = 0; j < e.size(); ++j)
    strength[j] = e.bodies[j].impedance_weight();
  return solve_monopole(e, strength, BoundaryKind::impedance);
}

DiscreteFieldSolution solve_neumann(const ParticleEnsemble& e) {
  if (e.boundary != BoundaryKind::neumann)
    throw Error::validation("solve_neumann: ensemble boundary kind mismatch");
  validate_common(e);

  DiscreteFieldSolution sol;
  sol.boundary = BoundaryKind::neumann;
  sol.k = e.k;
  sol.incident = e.incident;
  sol.regime = try_regime(e, WaveMode::acoustic, sol.regime_checked);

  const std::size_t nb = e.size();
  if (nb == 0) return sol;
  const double k = e.k;
  const auto n = static_cast<Eigen::Index>(4 * nb);

  // Unknown layout per body: [u, du/dx, du/dy, du/dz].
  Eigen::MatrixXcd system = Eigen::MatrixXcd::Identity(n, n);
  parallel_for(nb, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      for (std::size_t j = 0; j < nb; ++j) {
        if (j == m) continue;
        const Vec3 diff = e.positions[m] - e.positions[j];
        const double r = diff.norm();
        const Vec3 dir = diff / r;
        const Complex g = greens(k, e.positions[m], e.positions[j]);
        const Complex gp = g * (kImag * k - 1.0 / r);  // dg/dr
        const double volume = e.bodies[j].volume;
        const Mat3& beta = e.bodies[j].beta;
        const Eigen::RowVector3d nb_row = (dir.transpose() * beta);

        const auto row = static_cast<Eigen::Index>(4 * m);
        const auto col = static_cast<Eigen::Index>(4 * j);
        // Strength of body j seen from m: ik V (n . beta d) - k^2 V u.
        system(row, col) = -g * (-k * k * volume);
        for (int q = 0; q < 3; ++q)
          system(row, col + 1 + q) = -g * (kImag * k * volume * nb_row(q));

        // Gradient rows: d/dx_m of [g * strength(direction)].
        const Mat3 transverse =
            (Mat3::Identity() - dir * dir.transpose()) / r;
        const Mat3 beta_coupling = dir * nb_row;  // n (n . beta .)
        for (int p = 0; p < 3; ++p) {
          system(row + 1 + p, col) = -gp * dir(p) * (-k * k * volume);
          for (int q = 0; q < 3; ++q)
            system(row + 1 + p, col + 1 + q) =
                -(gp * beta_coupling(p, q) + g * (transverse * beta)(p, q)) *
                (kImag * k * volume);
        }
      }
    }
  });

  Eigen::VectorXcd rhs(n);
  for (std::size_t m = 0; m < nb; ++m) {
    const Complex u0 = incident_wave(k, e.incident, e.positions[m]);
    rhs(static_cast<Eigen::Index>(4 * m)) = u0;
    for (int p = 0; p < 3; ++p)
      rhs(static_cast<Eigen::Index>(4 * m + 1 + p)) =
          kImag * k * e.incident(p) * u0;
  }

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system);
  Eigen::VectorXcd x = lu.solve(rhs);
  if (!x.allFinite()) throw Error::numerical("solve_neumann: singular system");
  sol.residual = (system * x - rhs).norm() / rhs.norm();
  if (!(sol.residual < 1e-10))
    throw Error::numerical("solve_neumann: residual " +
                           std::to_string(sol.residual) + " exceeds 1e-10");

  sol.u.resize(static_cast<Eigen::Index>(nb));
  sol.grad_u.resize(3, static_cast<Eigen::Index>(nb));
  for (std::size_t m = 0; m < nb; ++m) {
    sol.u(static_cast<Eigen::Index>(m)) = x(static_cast<Eigen::Index>(4 * m));
    for (int p = 0; p < 3; ++p)
      sol.grad_u(p, static_cast<Eigen::Index>(m)) =
          x(static_cast<Eigen::Index>(4 * m + 1 + p));
  }
  return sol;
}

namespace {

// Direction-dependent strength of a hard body toward unit direction `dir`.
Complex neumann_strength(const DiscreteFieldSolution& sol,
                         const ParticleEnsemble& e, std::size_t j,
                         const Vec3& dir) {
  const double k = sol.k;
  const double volume = e.bodies[j].volume;
  const Eigen::RowVector3d weights = dir.transpose() * e.bodies[j].beta;
  Complex directional = 0.0;
  for (int q = 0; q < 3; ++q)
    directional += weights(q) * sol.grad_u(q, static_cast<Eigen::Index>(j));
  return kImag * k * volume * directional -
         k * k * volume * sol.u(static_cast<Eigen::Index>(j));
}

}  // namespace

std::vector<Complex> evaluate_field(const DiscreteFieldSolution& sol,
                                    const ParticleEnsemble& e,
                                    std::span<const Vec3> points,
                                    double proximity_safety) {
  const double a = e.max_body_radius();
  bool warned = false;
  std::vector<Complex> out;
  out.reserve(points.size());
  for (const Vec3& x : points) {
    Complex u = incident_wave(sol.k, sol.incident, x);
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double r = (x - e.positions[j]).norm();
      if (!warned && a > 0.0 && r < proximity_safety * a) {
        std::fprintf(stderr,
                     "smallscat: field point within %g body radii of a body; "
                     "values there are outside the model's validity\n",
                     proximity_safety);
        warned = true;
      }
      if (sol.boundary == BoundaryKind::neumann) {
        const Vec3 dir = (x - e.positions[j]) / r;
        u += greens(sol.k, x, e.positions[j]) *
             neumann_strength(sol, e, j, dir);
      } else {
        u += greens(sol.k, x, e.positions[j]) *
             sol.charge(static_cast<Eigen::Index>(j));
      }
    }
    out.push_back(u);
  }
  return out;
}

std::vector<Complex> far_field_amplitude(const DiscreteFieldSolution& sol,
                                         const ParticleEnsemble& e,
                                         std::span<const Vec3> directions) {
  std::vector<Complex> out;
  out.reserve(directions.size());
  for (const Vec3& dir : directions) {
    if (std::abs(dir.norm() - 1.0) > 1e-9)
      throw Error::validation("far_field_amplitude: directions must be unit vectors");
    Complex a = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) {
      const Complex phase =
          std::exp(-kImag * (sol.k * dir.dot(e.positions[j])));
      if (sol.boundary == BoundaryKind::neumann)
        a += phase * neumann_strength(sol, e, j, dir);
      else
        a += phase * sol.charge(static_cast<Eigen::Index>(j));
    }
    out.push_back(a / (4.0 * kPi));
  }
  return out;
}

}  // namespace smallscat
