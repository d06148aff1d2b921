#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

#include "smallscat/error.hpp"

namespace smallscat {

struct IterativeResult {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Restarted GMRES with modified Gram-Schmidt, for operators given as a
/// matvec callback. Deterministic: no randomized starts, fixed reduction
/// order.
inline IterativeResult gmres(
    const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& apply,
    const Eigen::VectorXcd& rhs, Eigen::VectorXcd& x, double tol, int restart,
    int max_iterations) {
  using Vector = Eigen::VectorXcd;
  using Complex = std::complex<double>;

  const auto n = rhs.size();
  if (x.size() != n) x = Vector::Zero(n);
  const double rhs_norm = rhs.norm();
  IterativeResult result;
  if (rhs_norm == 0.0) {
    x.setZero();
    result.converged = true;
    return result;
  }

  Vector r(n), w(n);
  apply(x, w);
  r = rhs - w;

  Eigen::MatrixXcd basis(n, restart + 1);
  Eigen::MatrixXcd hess = Eigen::MatrixXcd::Zero(restart + 1, restart);
  Eigen::VectorXcd cs(restart), sn(restart), g(restart + 1);

  int total = 0;
  while (total < max_iterations) {
    double beta = r.norm();
    result.residual = beta / rhs_norm;
    if (result.residual < tol) {
      result.converged = true;
      return result;
    }
    basis.col(0) = r / beta;
    g.setZero();
    g(0) = beta;

    int k = 0;
    for (; k < restart && total < max_iterations; ++k, ++total) {
      apply(basis.col(k), w);
      for (int i = 0; i <= k; ++i) {
        Complex hik = basis.col(i).dot(w);  // conjugated inner product
        hess(i, k) = hik;
        w -= hik * basis.col(i);
      }
      double hnorm = w.norm();
      hess(k + 1, k) = hnorm;
      if (hnorm > 0.0) basis.col(k + 1) = w / hnorm;

      // Apply stored Givens rotations, then generate the new one.
      for (int i = 0; i < k; ++i) {
        Complex tmp = std::conj(cs(i)) * hess(i, k) + std::conj(sn(i)) * hess(i + 1, k);
        hess(i + 1, k) = -sn(i) * hess(i, k) + cs(i) * hess(i + 1, k);
        hess(i, k) = tmp;
      }
      double denom = std::sqrt(std::norm(hess(k, k)) + std::norm(hess(k + 1, k)));
      if (denom == 0.0) {
        cs(k) = 1.0;
        sn(k) = 0.0;
      } else {
        cs(k) = hess(k, k) / denom;
        sn(k) = hess(k + 1, k) / denom;
      }
      hess(k, k) = std::conj(cs(k)) * hess(k, k) + std::conj(sn(k)) * hess(k + 1, k);
      hess(k + 1, k) = 0.0;
      Complex tmp = std::conj(cs(k)) * g(k);
      g(k + 1) = -sn(k) * g(k);
      g(k) = tmp;

      result.residual = std::abs(g(k + 1)) / rhs_norm;
      if (result.residual < tol) {
        ++k;
        ++total;
        break;
      }
    }

    // Back-substitute the k x k triangular system and update x.
    Eigen::VectorXcd y(k);
    for (int i = k - 1; i >= 0; --i) {
      Complex sum = g(i);
      for (int j = i + 1; j < k; ++j) sum -= hess(i, j) * y(j);
      y(i) = sum / hess(i, i);
    }
    for (int i = 0; i < k; ++i) x += y(i) * basis.col(i);

    apply(x, w);
    r = rhs - w;
    result.iterations = total;
    result.residual = r.norm() / rhs_norm;
    if (result.residual < tol) {
      result.converged = true;
      return result;
    }
  }
  result.iterations = total;
  return result;
}

}  // namespace smallscat
