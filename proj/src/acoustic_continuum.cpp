#include "smallscat/acoustic_continuum.hpp"

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

double ball_radius(double cell_volume) {
  return std::cbrt(3.0 * cell_volume / (4.0 * kPi));
}

// Kernel family shared by the dense and FFT paths. Offsets are target minus
// source; the zero offset carries the equal-volume-ball regularization.
struct Kernels {
  double k;
  double cell_volume;
  double r_ball;

  explicit Kernels(double wavenumber, double volume)
      : k(wavenumber), cell_volume(volume), r_ball(ball_radius(volume)) {}

  Complex g(const Vec3& v) const {
    const double r = v.norm();
    if (r == 0.0) return r_ball * r_ball / (2.0 * cell_volume);
    return std::exp(kImag * (k * r)) / (4.0 * kPi * r);
  }
  // g(r) n_p
  Complex g_dir(const Vec3& v, int p) const {
    const double r = v.norm();
    if (r == 0.0) return 0.0;
    return std::exp(kImag * (k * r)) / (4.0 * kPi * r) * (v(p) / r);
  }
  // dg/dr n_p
  Complex gprime_dir(const Vec3& v, int p) const {
    const double r = v.norm();
    if (r == 0.0) return 0.0;
    const Complex g0 = std::exp(kImag * (k * r)) / (4.0 * kPi * r);
    return g0 * (kImag * k - 1.0 / r) * (v(p) / r);
  }
  // d/dx_p [g n_q]: the gradient-equation coupling to the dipole term. The
  // even self part integrates over the ball to g(r_ball) * (4 pi r_ball^2/3).
  Complex grad_dipole(const Vec3& v, int p, int q) const {
    const double r = v.norm();
    if (r == 0.0) {
      if (p != q) return 0.0;
      return std::exp(kImag * (k * r_ball)) * r_ball / (3.0 * cell_volume);
    }
    const Complex g0 = std::exp(kImag * (k * r)) / (4.0 * kPi * r);
    const Complex gp = g0 * (kImag * k - 1.0 / r);
    const double np = v(p) / r, nq = v(q) / r;
    const double delta = p == q ? 1.0 : 0.0;
    return gp * np * nq + g0 * (delta - np * nq) / r;
  }
};

void validate_nonnegative(const std::vector<double>& field, const char* what) {
  for (double v : field)
    if (v < 0.0)
      throw Error::validation(std::string(what) + " density must be >= 0");
}

Eigen::VectorXcd incident_on_grid(const Grid3& grid, double k, const Vec3& nu) {
  const auto n = static_cast<Eigen::Index>(grid.cell_count());
  Eigen::VectorXcd u0(n);
  for (Eigen::Index i = 0; i < n; ++i)
    u0(i) = incident_wave(k, nu, grid.center(static_cast<std::size_t>(i)));
  return u0;
}

// ---- scalar (soft / impedance) path ---------------------------------------

GridFieldSolution solve_scalar(const DensityFields& fields,
                               const std::vector<double>& density, double k,
                               const Vec3& nu, const ContinuumOptions& opts,
                               ContinuumKind kind) {
  if (!(k > 0.0)) throw Error::validation("continuum solve: k must be > 0");
  if (std::abs(nu.norm() - 1.0) > 1e-9)
    throw Error::validation("continuum solve: incident direction must be unit");
  validate_nonnegative(density, kind == ContinuumKind::soft ? "capacitance"
                                                            : "impedance weight");
  GridFieldSolution sol;
  sol.kind = kind;
  sol.grid = fields.grid;
  sol.k = k;
  sol.incident = nu;

  const std::size_t n = fields.grid.cell_count();
  const double dv = fields.grid.cell_volume();
  const Kernels ker(k, dv);
  Eigen::VectorXcd rhs = incident_on_grid(fields.grid, k, nu);

  bool zero_density = true;
  for (double c : density) zero_density = zero_density && c == 0.0;
  if (zero_density) {
    sol.u = rhs;
    sol.method = "identity";
    return sol;
  }

  const bool dense =
      opts.solver == ContinuumOptions::Solver::dense ||
      (opts.solver == ContinuumOptions::Solver::automatic &&
       n <= static_cast<std::size_t>(opts.dense_limit));

  if (dense) {
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXcd m(ni, ni);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Vec3 xi = fields.grid.center(i);
        for (std::size_t j = 0; j < n; ++j) {
          const Vec3 v = xi - fields.grid.center(j);
          Complex val = ker.g(v) * (density[j] * dv);
          if (i == j) val += 1.0;
          m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = val;
        }
      }
    });
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    sol.u = lu.solve(rhs);
    if (!sol.u.allFinite())
      throw Error::numerical("continuum solve: singular system");
    sol.residual = (m * sol.u - rhs).norm() / rhs.norm();
    sol.method = "dense-lu";
  } else {
    GridConvolution conv(fields.grid, 1, 1);
    const int kg = conv.add_kernel([&](const Vec3& v) { return ker.g(v); });
    std::vector<Complex> w(n), prod(n);
    auto apply = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
      for (std::size_t i = 0; i < n; ++i)
        w[i] = density[i] * dv * x(static_cast<Eigen::Index>(i));
      conv.load_field(0, w.data());
      conv.clear_outputs();
      conv.multiply_accumulate(kg, 0, 1.0, 0);
      conv.extract(0, prod.data());
      y.resize(x.size());
      for (std::size_t i = 0; i < n; ++i)
        y(static_cast<Eigen::Index>(i)) =
            x(static_cast<Eigen::Index>(i)) + prod[i];
    };
    sol.u = Eigen::VectorXcd::Zero(rhs.size());
    IterativeResult res = gmres(apply, rhs, sol.u, opts.tolerance,
                                opts.gmres_restart, opts.max_iterations);
    if (!res.converged) {
      throw Error::numerical(
          "continuum solve: GMRES stalled at relative residual " +
          std::to_string(res.residual) + " after " +
          std::to_string(res.iterations) + " iterations");
    }
    sol.residual = res.residual;
    sol.iterations = res.iterations;
    sol.method = "gmres-fft";
  }
  if (!(sol.residual < 1e-8))
    throw Error::numerical("continuum solve: residual " +
                           std::to_string(sol.residual) + " exceeds 1e-8");
  return sol;
}

}  // namespace

GridFieldSolution solve_soft(const DensityFields& fields, double k,
                             const Vec3& nu, const ContinuumOptions& opts) {
  return solve_scalar(fields, fields.capacitance, k, nu, opts,
                      ContinuumKind::soft);
}

GridFieldSolution solve_impedance_continuum(const DensityFields& fields,
                                            double k, const Vec3& nu,
                                            const ContinuumOptions& opts) {
  return solve_scalar(fields, fields.impedance_weight, k, nu, opts,
                      ContinuumKind::impedance);
}

GridFieldSolution solve_hard(const DensityFields& fields, double k,
                             const Vec3& nu, const ContinuumOptions& opts) {
  if (!(k > 0.0)) throw Error::validation("solve_hard: k must be > 0");
  if (std::abs(nu.norm() - 1.0) > 1e-9)
    throw Error::validation("solve_hard: incident direction must be unit");
  validate_nonnegative(fields.volume, "volume");

  GridFieldSolution sol;
  sol.kind = ContinuumKind::hard;
  sol.grid = fields.grid;
  sol.k = k;
  sol.incident = nu;
  sol.closure = "laplacian(u_e) = -k^2 u_e";

  const std::size_t n = fields.grid.cell_count();
  const double dv = fields.grid.cell_volume();
  const Kernels ker(k, dv);

  // Per-cell integrated weights: total volume and beta * volume.
  std::vector<double> vcell(n);
  std::vector<Mat3> bcell(n);
  bool empty = true;
  for (std::size_t i = 0; i < n; ++i) {
    vcell[i] = fields.volume[i] * dv;
    bcell[i] = fields.beta_volume[i] * dv;
    empty = empty && vcell[i] == 0.0 && bcell[i].isZero(0.0);
  }

  Eigen::VectorXcd u0 = incident_on_grid(fields.grid, k, nu);
  const auto nuns = static_cast<Eigen::Index>(4 * n);
  Eigen::VectorXcd rhs(nuns);
  for (std::size_t i = 0; i < n; ++i) {
    rhs(static_cast<Eigen::Index>(4 * i)) = u0(static_cast<Eigen::Index>(i));
    for (int p = 0; p < 3; ++p)
      rhs(static_cast<Eigen::Index>(4 * i + 1 + p)) =
          kImag * k * nu(p) * u0(static_cast<Eigen::Index>(i));
  }

  auto unpack = [&](const Eigen::VectorXcd& x) {
    sol.u.resize(static_cast<Eigen::Index>(n));
    sol.grad_u.resize(3, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      sol.u(static_cast<Eigen::Index>(i)) = x(static_cast<Eigen::Index>(4 * i));
      for (int p = 0; p < 3; ++p)
        sol.grad_u(p, static_cast<Eigen::Index>(i)) =
            x(static_cast<Eigen::Index>(4 * i + 1 + p));
    }
  };

  if (empty) {
    unpack(rhs);
    sol.method = "identity";
    return sol;
  }

  const bool dense =
      opts.solver == ContinuumOptions::Solver::dense ||
      (opts.solver == ContinuumOptions::Solver::automatic &&
       4 * n <= static_cast<std::size_t>(opts.dense_limit));

  Eigen::VectorXcd x;
  if (dense) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(nuns, nuns);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Vec3 xi = fields.grid.center(i);
        for (std::size_t j = 0; j < n; ++j) {
          const Vec3 v = xi - fields.grid.center(j);
          const auto row = static_cast<Eigen::Index>(4 * i);
          const auto col = static_cast<Eigen::Index>(4 * j);
          const Complex k1 = ker.g(v);
          m(row, col) += k * k * vcell[j] * k1;
          for (int q = 0; q < 3; ++q) {
            Complex coupling = 0.0;
            for (int p = 0; p < 3; ++p)
              coupling += ker.g_dir(v, p) * bcell[j](p, q);
            m(row, col + 1 + q) = -kImag * k * coupling;
          }
          for (int p = 0; p < 3; ++p) {
            m(row + 1 + p, col) = k * k * vcell[j] * ker.gprime_dir(v, p);
            for (int q = 0; q < 3; ++q) {
              Complex coupling = 0.0;
              for (int r = 0; r < 3; ++r)
                coupling += ker.grad_dipole(v, p, r) * bcell[j](r, q);
              Complex entry = -kImag * k * coupling;
              if (i == j && p == q) entry += 1.0;
              m(row + 1 + p, col + 1 + q) = entry;
            }
          }
        }
      }
    });
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
    x = lu.solve(rhs);
    if (!x.allFinite()) throw Error::numerical("solve_hard: singular system");
    sol.residual = (m * x - rhs).norm() / rhs.norm();
    sol.method = "dense-lu";
  } else {
    GridConvolution conv(fields.grid, 4, 4);
    const int kg = conv.add_kernel([&](const Vec3& v) { return ker.g(v); });
    int kdir[3], kgrad[3];
    int kdd[3][3];
    for (int p = 0; p < 3; ++p) {
      kdir[p] = conv.add_kernel(
          [&, p](const Vec3& v) { return ker.g_dir(v, p); });
      kgrad[p] = conv.add_kernel(
          [&, p](const Vec3& v) { return ker.gprime_dir(v, p); });
    }
    for (int p = 0; p < 3; ++p)
      for (int q = p; q < 3; ++q) {
        kdd[p][q] = conv.add_kernel(
            [&, p, q](const Vec3& v) { return ker.grad_dipole(v, p, q); });
        kdd[q][p] = kdd[p][q];
      }

    std::vector<Complex> w0(n), wd[3], out(n);
    for (auto& w : wd) w.resize(n);
    auto apply = [&](const Eigen::VectorXcd& in, Eigen::VectorXcd& y) {
      for (std::size_t i = 0; i < n; ++i) {
        const Complex ui = in(static_cast<Eigen::Index>(4 * i));
        w0[i] = vcell[i] * ui;
        for (int p = 0; p < 3; ++p) {
          Complex acc = 0.0;
          for (int q = 0; q < 3; ++q)
            acc += bcell[i](p, q) * in(static_cast<Eigen::Index>(4 * i + 1 + q));
          wd[p][i] = acc;
        }
      }
      conv.load_field(0, w0.data());
      for (int p = 0; p < 3; ++p) conv.load_field(1 + p, wd[p].data());
      conv.clear_outputs();
      const Complex mk2(-k * k, 0.0);
      const Complex ik = kImag * k;
      conv.multiply_accumulate(kg, 0, mk2, 0);
      for (int p = 0; p < 3; ++p) {
        conv.multiply_accumulate(kdir[p], 1 + p, ik, 0);
        conv.multiply_accumulate(kgrad[p], 0, mk2, 1 + p);
        for (int q = 0; q < 3; ++q)
          conv.multiply_accumulate(kdd[p][q], 1 + q, ik, 1 + p);
      }
      y.resize(in.size());
      conv.extract(0, out.data());
      for (std::size_t i = 0; i < n; ++i)
        y(static_cast<Eigen::Index>(4 * i)) =
            in(static_cast<Eigen::Index>(4 * i)) - out[i];
      for (int p = 0; p < 3; ++p) {
        conv.extract(1 + p, out.data());
        for (std::size_t i = 0; i < n; ++i)
          y(static_cast<Eigen::Index>(4 * i + 1 + p)) =
              in(static_cast<Eigen::Index>(4 * i + 1 + p)) - out[i];
      }
    };
    x = Eigen::VectorXcd::Zero(nuns);
    IterativeResult res = gmres(apply, rhs, x, opts.tolerance,
                                opts.gmres_restart, opts.max_iterations);
    if (!res.converged)
      throw Error::numerical(
          "solve_hard: GMRES stalled at relative residual " +
          std::to_string(res.residual) + " after " +
          std::to_string(res.iterations) + " iterations");
    sol.residual = res.residual;
    sol.iterations = res.iterations;
    sol.method = "gmres-fft";
  }
  if (!(sol.residual < 1e-8))
    throw Error::numerical("solve_hard: residual " +
                           std::to_string(sol.residual) + " exceeds 1e-8");
  unpack(x);
  return sol;
}

double schrodinger_residual(const GridFieldSolution& sol,
                            const DensityFields& fields, double k) {
  if (sol.kind != ContinuumKind::soft)
    throw Error::validation("schrodinger_residual: defined for the soft solve");
  const auto& grid = sol.grid;
  for (int ax = 0; ax < 3; ++ax)
    if (grid.dims[ax] < 5)
      throw Error::validation(
          "schrodinger_residual: grid too coarse, need >= 5 nodes per axis");
  const Vec3 h = grid.spacing();
  double num = 0.0, den = 0.0;
  for (int kk = 1; kk + 1 < grid.dims[2]; ++kk)
    for (int j = 1; j + 1 < grid.dims[1]; ++j)
      for (int i = 1; i + 1 < grid.dims[0]; ++i) {
        const std::size_t c = grid.index(i, j, kk);
        const Complex uc = sol.u(static_cast<Eigen::Index>(c));
        Complex lap = 0.0;
        lap += (sol.u(static_cast<Eigen::Index>(grid.index(i - 1, j, kk))) -
                2.0 * uc +
                sol.u(static_cast<Eigen::Index>(grid.index(i + 1, j, kk)))) /
               (h.x() * h.x());
        lap += (sol.u(static_cast<Eigen::Index>(grid.index(i, j - 1, kk))) -
                2.0 * uc +
                sol.u(static_cast<Eigen::Index>(grid.index(i, j + 1, kk)))) /
               (h.y() * h.y());
        lap += (sol.u(static_cast<Eigen::Index>(grid.index(i, j, kk - 1))) -
                2.0 * uc +
                sol.u(static_cast<Eigen::Index>(grid.index(i, j, kk + 1)))) /
               (h.z() * h.z());
        const Complex res = lap + (k * k - fields.capacitance[c]) * uc;
        num += std::norm(res);
        den += std::norm(k * k * uc);
      }
  return std::sqrt(num / den);
}

double helmholtz_residual(const GridFieldSolution& sol, double k) {
  const auto& grid = sol.grid;
  for (int ax = 0; ax < 3; ++ax)
    if (grid.dims[ax] < 5)
      throw Error::validation(
          "helmholtz_residual: grid too coarse, need >= 5 nodes per axis");
  const Vec3 h = grid.spacing();
  double num = 0.0, den = 0.0;
  for (int kk = 1; kk + 1 < grid.dims[2]; ++kk)
    for (int j = 1; j + 1 < grid.dims[1]; ++j)
      for (int i = 1; i + 1 < grid.dims[0]; ++i) {
        const std::size_t c = grid.index(i, j, kk);
        const Complex uc = sol.u(static_cast<Eigen::Index>(c));
        Complex lap = 0.0;
        lap += (sol.u(static_cast<Eigen::Index>(grid.index(i - 1, j, kk))) -
                2.0 * uc +
                sol.u(static_cast<Eigen::Index>(grid.index(i + 1, j, kk)))) /
               (h.x() * h.x());
        lap += (sol.u(static_cast<Eigen::Index>(grid.index(i, j - 1, kk))) -
                2.0 * uc +
                sol.u(static_cast<Eigen::Index>(grid.index(i, j + 1, kk)))) /
               (h.y() * h.y());
        lap += (sol.u(static_cast<Eigen::Index>(grid.index(i, j, kk - 1))) -
                2.0 * uc +
                sol.u(static_cast<Eigen::Index>(grid.index(i, j, kk + 1)))) /
               (h.z() * h.z());
        num += std::norm(lap + k * k * uc);
        den += std::norm(k * k * uc);
      }
  return std::sqrt(num / den);
}

std::vector<Complex> evaluate_continuum_field(const GridFieldSolution& sol,
                                              const DensityFields& fields,
                                              std::span<const Vec3> points) {
  const std::size_t n = sol.grid.cell_count();
  const double dv = sol.grid.cell_volume();
  const Kernels ker(sol.k, dv);
  const std::vector<double>* density = nullptr;
  if (sol.kind == ContinuumKind::soft) density = &fields.capacitance;
  if (sol.kind == ContinuumKind::impedance) density = &fields.impedance_weight;

  std::vector<Complex> out;
  out.reserve(points.size());
  for (const Vec3& x : points) {
    Complex u = incident_wave(sol.k, sol.incident, x);
    for (std::size_t j = 0; j < n; ++j) {
      Vec3 v = x - sol.grid.center(j);
      const double r = v.norm();
      // Clamp inside the equal-volume ball so plots stay finite near nodes.
      if (r < ker.r_ball) {
        if (r == 0.0)
          v = Vec3(ker.r_ball, 0, 0);
        else
          v *= ker.r_ball / r;
      }
      if (sol.kind == ContinuumKind::hard) {
        const Complex uj = sol.u(static_cast<Eigen::Index>(j));
        Complex dip = 0.0;
        const double rr = v.norm();
        for (int p = 0; p < 3; ++p) {
          Complex acc = 0.0;
          for (int q = 0; q < 3; ++q)
            acc += fields.beta_volume[j](p, q) * dv *
                   sol.grad_u(q, static_cast<Eigen::Index>(j));
          dip += (v(p) / rr) * acc;
        }
        u += ker.g(v) * (kImag * sol.k * dip -
                         sol.k * sol.k * fields.volume[j] * dv * uj);
      } else {
        u -= ker.g(v) * (*density)[j] * dv *
             sol.u(static_cast<Eigen::Index>(j));
      }
    }
    out.push_back(u);
  }
  return out;
}

}  // namespace smallscat
