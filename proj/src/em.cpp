#include "smallscat/em.hpp"

#include <cmath>
#include <numbers>

#include "smallscat/acoustic_discrete.hpp"
#include "smallscat/convolution.hpp"
#include "smallscat/linear.hpp"
#include "smallscat/parallel.hpp"

namespace smallscat {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Complex kImag{0.0, 1.0};

Mat3 cross_matrix(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// Algebraic cross product; Eigen's cross() conjugates complex operands.
CVec3 ccross(const CVec3& a, const CVec3& b) {
  return CVec3(a.y() * b.z() - a.z() * b.y(),
               a.z() * b.x() - a.x() * b.z(),
               a.x() * b.y() - a.y() * b.x());
}

// T - nu (nu . T .): strips the longitudinal part of the output.
Mat3 transverse_projected(const Mat3& tensor, const Vec3& nu) {
  return tensor - nu * (nu.transpose() * tensor);
}

Complex em_greens(double k, double r) {
  return std::exp(kImag * (k * r)) / r;
}

void validate_direction_pair(const Vec3& nu, const Vec3& pol) {
  if (std::abs(nu.norm() - 1.0) > 1e-9)
    throw Error::validation("em: incident direction must be a unit vector");
  if (std::abs(pol.norm() - 1.0) > 1e-9)
    throw Error::validation("em: polarization must be a unit vector");
  if (std::abs(nu.dot(pol)) > 1e-9)
    throw Error::validation(
        "em: polarization must be perpendicular to the incident direction");
}

}  // namespace

DipoleFarField dipole_far_fields(const CVec3& P, const CVec3& M,
                                 const Vec3& nu_prime, double k,
                                 const EmConstants& c) {
  if (std::abs(nu_prime.norm() - 1.0) > 1e-9)
    throw Error::validation("dipole_far_fields: direction must be unit");
  const CVec3 nu = nu_prime.cast<Complex>();
  const double pref = k * k / (4.0 * kPi);
  DipoleFarField out;
  out.E = pref * ((1.0 / c.eps0) * ccross(nu, ccross(P, nu)) +
                  std::sqrt(c.mu0 / c.eps0) * ccross(M, nu));
  out.H = std::sqrt(c.eps0 / c.mu0) * ccross(nu, out.E);
  return out;
}

Mat6c build_smatrix(const Mat3& alpha, const Mat3& beta_tilde, double volume,
                    const Vec3& nu_prime, double k, const EmConstants& c) {
  if (std::abs(nu_prime.norm() - 1.0) > 1e-9)
    throw Error::validation("build_smatrix: direction must be unit");
  if (!(volume > 0.0))
    throw Error::validation("build_smatrix: volume must be > 0");
  const double pref = k * k * volume / (4.0 * kPi);
  const Mat3 cross_nu = cross_matrix(nu_prime);
  Mat6c s;
  s.setZero();
  s.block<3, 3>(0, 0) = (pref * transverse_projected(alpha, nu_prime)).cast<Complex>();
  s.block<3, 3>(0, 3) =
      (-pref * std::sqrt(c.mu0 * c.mu0 * c.mu0 / c.eps0) * (cross_nu * beta_tilde))
          .cast<Complex>();
  s.block<3, 3>(3, 0) =
      (pref * std::sqrt(c.eps0 / c.mu0) * (cross_nu * alpha)).cast<Complex>();
  s.block<3, 3>(3, 3) =
      (pref * c.mu0 * transverse_projected(beta_tilde, nu_prime)).cast<Complex>();
  return s;
}

Vec6c incident_em(double k, const Vec3& nu, const Vec3& pol, const Vec3& x,
                  const EmConstants& c) {
  const Complex phase = incident_wave(k, nu, x);
  const Vec3 h_dir = std::sqrt(c.eps0 / c.mu0) * nu.cross(pol);
  Vec6c u;
  u.head<3>() = pol.cast<Complex>() * phase;
  u.tail<3>() = h_dir.cast<Complex>() * phase;
  return u;
}

EmDiscreteSolution solve_em_discrete(const ParticleEnsemble& e,
                                     const Vec3& polarization,
                                     const EmConstants& c,
                                     bool allow_regime_violation) {
  validate_direction_pair(e.incident, polarization);
  if (!(e.k > 0.0)) throw Error::validation("em: k must be > 0");

  EmDiscreteSolution sol;
  sol.k = e.k;
  sol.incident = e.incident;
  sol.polarization = polarization;
  sol.constants = c;

  const std::size_t nb = e.size();
  if (nb > 0) {
    sol.regime = check_regime(e, WaveMode::em);
    sol.regime_checked = true;
    if (!sol.regime.far_zone_ok && !allow_regime_violation)
      throw Error::validation(
          "solve_em_discrete: far-zone assumption violated (" +
          sol.regime.summary() +
          "); pass the override to solve anyway");
  }
  if (nb == 0) {
    sol.U.resize(0);
    return sol;
  }
  for (std::size_t j = 0; j < nb; ++j)
    if (!(e.bodies[j].volume > 0.0))
      throw Error::validation("solve_em_discrete: body " + std::to_string(j) +
                              " has non-positive volume");

  const auto n = static_cast<Eigen::Index>(6 * nb);
  Eigen::MatrixXcd system = Eigen::MatrixXcd::Identity(n, n);
  parallel_for(nb, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m)
      for (std::size_t j = 0; j < nb; ++j) {
        if (j == m) continue;
        const Vec3 diff = e.positions[m] - e.positions[j];
        const double r = diff.norm();
        const Vec3 dir = diff / r;
        const Mat6c s = build_smatrix(e.bodies[j].alpha,
                                      e.bodies[j].beta_tilde,
                                      e.bodies[j].volume, dir, e.k, c);
        system.block<6, 6>(static_cast<Eigen::Index>(6 * m),
                           static_cast<Eigen::Index>(6 * j)) =
            -em_greens(e.k, r) * s;
      }
  });

  Eigen::VectorXcd rhs(n);
  for (std::size_t m = 0; m < nb; ++m)
    rhs.segment<6>(static_cast<Eigen::Index>(6 * m)) =
        incident_em(e.k, e.incident, polarization, e.positions[m], c);

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system);
  sol.U = lu.solve(rhs);
  if (!sol.U.allFinite())
    throw Error::numerical("solve_em_discrete: singular system");
  sol.residual = (system * sol.U - rhs).norm() / rhs.norm();
  if (!(sol.residual < 1e-10))
    throw Error::numerical("solve_em_discrete: residual " +
                           std::to_string(sol.residual) + " exceeds 1e-10");
  return sol;
}

std::vector<Vec6c> evaluate_em_field(const EmDiscreteSolution& sol,
                                     const ParticleEnsemble& e,
                                     std::span<const Vec3> points) {
  std::vector<Vec6c> out;
  out.reserve(points.size());
  for (const Vec3& x : points) {
    Vec6c u = incident_em(sol.k, sol.incident, sol.polarization, x,
                          sol.constants);
    for (std::size_t j = 0; j < e.size(); ++j) {
      const Vec3 diff = x - e.positions[j];
      const double r = diff.norm();
      const Vec3 dir = diff / r;
      const Mat6c s =
          build_smatrix(e.bodies[j].alpha, e.bodies[j].beta_tilde,
                        e.bodies[j].volume, dir, sol.k, sol.constants);
      u += em_greens(sol.k, r) * s *
           sol.U.segment<6>(static_cast<Eigen::Index>(6 * j));
    }
    out.push_back(u);
  }
  return out;
}

namespace {

// Per-cell S-matrix of the binned tensor densities; the cell volume plays
// the role of the body volume, so the blocks carry alpha(y)V(y) * dV.
Mat6c cell_smatrix(const DensityFields& fields, std::size_t cell,
                   const Vec3& dir, double k, const EmConstants& c) {
  const double dv = fields.grid.cell_volume();
  const double pref = k * k * dv / (4.0 * kPi);
  const Mat3& a = fields.alpha_volume[cell];
  const Mat3& b = fields.beta_tilde_volume[cell];
  const Mat3 cross_nu = cross_matrix(dir);
  Mat6c s;
  s.setZero();
  s.block<3, 3>(0, 0) = (pref * transverse_projected(a, dir)).cast<Complex>();
  s.block<3, 3>(0, 3) =
      (-pref * std::sqrt(c.mu0 * c.mu0 * c.mu0 / c.eps0) * (cross_nu * b))
          .cast<Complex>();
  s.block<3, 3>(3, 0) =
      (pref * std::sqrt(c.eps0 / c.mu0) * (cross_nu * a)).cast<Complex>();
  s.block<3, 3>(3, 3) =
      (pref * c.mu0 * transverse_projected(b, dir)).cast<Complex>();
  return s;
}

}  // namespace

EmGridSolution solve_em_continuum(const DensityFields& fields, double k,
                                  const Vec3& nu, const Vec3& polarization,
                                  const EmConstants& c,
                                  const ContinuumOptions& opts) {
  validate_direction_pair(nu, polarization);
  if (!(k > 0.0)) throw Error::validation("em: k must be > 0");

  EmGridSolution sol;
  sol.grid = fields.grid;
  sol.k = k;
  sol.incident = nu;
  sol.polarization = polarization;
  sol.constants = c;

  const std::size_t n = fields.grid.cell_count();
  const double dv = fields.grid.cell_volume();
  const auto nuns = static_cast<Eigen::Index>(6 * n);

  Eigen::VectorXcd rhs(nuns);
  for (std::size_t i = 0; i < n; ++i)
    rhs.segment<6>(static_cast<Eigen::Index>(6 * i)) =
        incident_em(k, nu, polarization, fields.grid.center(i), c);

  bool empty = true;
  double max_tensor = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = fields.alpha_volume[i].norm() +
                     c.mu0 * fields.beta_tilde_volume[i].norm();
    max_tensor = std::max(max_tensor, t);
    empty = empty && t == 0.0;
  }

  // Size of the dropped self-cell coupling: |k^2/(4 pi) * integral of
  // exp(ikr)/r over the equal-volume ball| times the largest cell tensor.
  {
    const double rb = std::cbrt(3.0 * dv / (4.0 * kPi));
    const Complex eikr = std::exp(kImag * (k * rb));
    const Complex ball =
        4.0 * kPi * (rb * eikr / (kImag * k) + (eikr - 1.0) / (k * k));
    sol.self_cell_estimate = std::abs(ball) * k * k / (4.0 * kPi) * max_tensor;
  }

  if (empty) {
    sol.U = rhs;
    sol.method = "identity";
    return sol;
  }

  const bool dense =
      opts.solver == ContinuumOptions::Solver::dense ||
      (opts.solver == ContinuumOptions::Solver::automatic &&
       6 * n <= static_cast<std::size_t>(opts.dense_limit));

  if (dense) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(nuns, nuns);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Vec3 xi = fields.grid.center(i);
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;  // self cell dropped
          const Vec3 diff = xi - fields.grid.center(j);
          const double r = diff.norm();
          const Vec3 dir = diff / r;
          m.block<6, 6>(static_cast<Eigen::Index>(6 * i),
                        static_cast<Eigen::Index>(6 * j)) =
              -em_greens(k, r) * cell_smatrix(fields, j, dir, k, c);
        }
      }
    });
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    sol.U = lu.solve(rhs);
    if (!sol.U.allFinite())
      throw Error::numerical("solve_em_continuum: singular system");
    sol.residual = (m * sol.U - rhs).norm() / rhs.norm();
    sol.method = "dense-lu";
  } else {
    GridConvolution conv(fields.grid, 6, 6);
    auto g_em = [&](const Vec3& v) -> Complex {
      const double r = v.norm();
      if (r == 0.0) return 0.0;
      return em_greens(k, r);
    };
    const int kg = conv.add_kernel(g_em);
    int kn[3];
    int knn[3][3];
    for (int p = 0; p < 3; ++p)
      kn[p] = conv.add_kernel([&, p](const Vec3& v) -> Complex {
        const double r = v.norm();
        if (r == 0.0) return 0.0;
        return em_greens(k, r) * (v(p) / r);
      });
    for (int p = 0; p < 3; ++p)
      for (int q = p; q < 3; ++q) {
        knn[p][q] = conv.add_kernel([&, p, q](const Vec3& v) -> Complex {
          const double r = v.norm();
          if (r == 0.0) return 0.0;
          return em_greens(k, r) * (v(p) / r) * (v(q) / r);
        });
        knn[q][p] = knn[p][q];
      }

    const double pref = k * k * dv / (4.0 * kPi);
    const double mag_cross = std::sqrt(c.mu0 * c.mu0 * c.mu0 / c.eps0);
    const double ele_cross = std::sqrt(c.eps0 / c.mu0);
    const int levi[3][2] = {{1, 2}, {2, 0}, {0, 1}};  // (p, q, r) with +1 sign

    std::vector<Complex> ae[3], bh[3], out(n);
    for (auto& f : ae) f.resize(n);
    for (auto& f : bh) f.resize(n);

    auto apply = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto base = static_cast<Eigen::Index>(6 * i);
        for (int p = 0; p < 3; ++p) {
          Complex accA = 0.0, accB = 0.0;
          for (int q = 0; q < 3; ++q) {
            accA += fields.alpha_volume[i](p, q) * x(base + q);
            accB += fields.beta_tilde_volume[i](p, q) * x(base + 3 + q);
          }
          ae[p][i] = accA;
          bh[p][i] = accB;
        }
      }
      for (int p = 0; p < 3; ++p) {
        conv.load_field(p, ae[p].data());
        conv.load_field(3 + p, bh[p].data());
      }
      conv.clear_outputs();
      for (int p = 0; p < 3; ++p) {
        // E row p: g*AE_p - g n_p n_q AE_q - mag_cross * (n x BH)_p
        conv.multiply_accumulate(kg, p, pref, p);
        for (int q = 0; q < 3; ++q)
          conv.multiply_accumulate(knn[p][q], q, -pref, p);
        const int q1 = levi[p][0], r1 = levi[p][1];
        conv.multiply_accumulate(kn[q1], 3 + r1, -pref * mag_cross, p);
        conv.multiply_accumulate(kn[r1], 3 + q1, pref * mag_cross, p);
        // H row p: ele_cross * (n x AE)_p + mu0 ( g*BH_p - g n_p n_q BH_q )
        conv.multiply_accumulate(kn[q1], r1, pref * ele_cross, 3 + p);
        conv.multiply_accumulate(kn[r1], q1, -pref * ele_cross, 3 + p);
        conv.multiply_accumulate(kg, 3 + p, pref * c.mu0, 3 + p);
        for (int q = 0; q < 3; ++q)
          conv.multiply_accumulate(knn[p][q], 3 + q, -pref * c.mu0, 3 + p);
      }
      y.resize(x.size());
      for (int comp = 0; comp < 6; ++comp) {
        conv.extract(comp, out.data());
        for (std::size_t i = 0; i < n; ++i)
          y(static_cast<Eigen::Index>(6 * i + comp)) =
              x(static_cast<Eigen::Index>(6 * i + comp)) - out[i];
      }
    };
    sol.U = Eigen::VectorXcd::Zero(nuns);
    IterativeResult res = gmres(apply, rhs, sol.U, opts.tolerance,
                                opts.gmres_restart, opts.max_iterations);
    if (!res.converged)
      throw Error::numerical(
          "solve_em_continuum: GMRES stalled at relative residual " +
          std::to_string(res.residual));
    sol.residual = res.residual;
    sol.iterations = res.iterations;
    sol.method = "gmres-fft";
  }
  if (!(sol.residual < 1e-8))
    throw Error::numerical("solve_em_continuum: residual " +
                           std::to_string(sol.residual) + " exceeds 1e-8");
  return sol;
}

std::vector<Vec6c> evaluate_em_continuum_field(const EmGridSolution& sol,
                                               const DensityFields& fields,
                                               std::span<const Vec3> points) {
  const std::size_t n = fields.grid.cell_count();
  std::vector<Vec6c> out;
  out.reserve(points.size());
  for (const Vec3& x : points) {
    Vec6c u = incident_em(sol.k, sol.incident, sol.polarization, x,
                          sol.constants);
    for (std::size_t j = 0; j < n; ++j) {
      if (fields.alpha_volume[j].isZero(0.0) &&
          fields.beta_tilde_volume[j].isZero(0.0))
        continue;
      const Vec3 diff = x - fields.grid.center(j);
      const double r = diff.norm();
      if (r == 0.0) continue;
      const Vec3 dir = diff / r;
      u += em_greens(sol.k, r) *
           cell_smatrix(fields, j, dir, sol.k, sol.constants) *
           sol.U.segment<6>(static_cast<Eigen::Index>(6 * j));
    }
    out.push_back(u);
  }
  return out;
}

}  // namespace smallscat
