#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "gmm/model.hpp"

namespace gmm {

/// Frobenius-nearest PSD matrix: symmetrize, eigendecompose, clamp negative
/// eigenvalues to zero, reassemble.
inline Matrix psd_project(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("psd_project: matrix must be square");
  }
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("psd_project: matrix must be symmetric");
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct SolveResult {
  Vector mu;
  Matrix sigma;  // symmetric PSD
};

/// Linear reconstruction of an n-D mean and covariance from projected
/// statistics along the root direction r = sum_i b_i / sqrt(n) and the
/// offset directions r^{ij} = r + eps2 b_i + eps2 b_j:
///
///   v^i  = (1/n) sum_j v^{ij},   v = (1/n^2) sum_{ij} v^{ij}
///   V_ij = sqrt(n)(v - v^i - v^j) / ((2 eps2 + sqrt(n)) 2 eps2^2)
///          - (v^{ii} + v^{jj}) / ((2 eps2 + sqrt(n)) 4 eps2)
///          - v^0 / (2 eps2 sqrt(n)) + v^{ij} / (2 eps2^2)
///   mu    = sum_i ((m^{ii} - m^0) / (2 eps2)) b_i
///   Sigma = B (nearest PSD to V) B^T
///
/// Exact on noiseless inputs; with per-statistic error eps1 the output obeys
/// ||mu_hat - mu|| < eps1 sqrt(n) / eps2 and
/// ||Sigma_hat - Sigma||_F <= 6 n eps1 / eps2^2.
inline SolveResult solve(const Matrix& basis, double eps2, double m0,
                         double v0, const Matrix& means, const Matrix& vars) {
  const int n = static_cast<int>(basis.rows());
  if (basis.cols() != n || means.rows() != n || means.cols() != n ||
      vars.rows() != n || vars.cols() != n) {
    throw std::invalid_argument("solve: inconsistent shapes");
  }
  if (!(eps2 > 0.0)) throw std::invalid_argument("solve: eps2 must be > 0");
  if (!means.allFinite() || !vars.allFinite()) {
    throw std::invalid_argument("solve: missing direction statistic");
  }

  const double sn = std::sqrt(static_cast<double>(n));
  Vector vi(n);
  for (int i = 0; i < n; ++i) vi[i] = vars.row(i).mean();
  const double v = vars.mean();

  Matrix V(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      V(i, j) = sn * (v - vi[i] - vi[j]) / ((2.0 * eps2 + sn) * 2.0 * eps2 * eps2) -
                (vars(i, i) + vars(j, j)) / ((2.0 * eps2 + sn) * 4.0 * eps2) -
                v0 / (2.0 * eps2 * sn) + vars(i, j) / (2.0 * eps2 * eps2);
      V(j, i) = V(i, j);
    }
  }

  SolveResult out;
  out.mu = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    out.mu += ((means(i, i) - m0) / (2.0 * eps2)) * basis.col(i);
  }
  out.sigma = basis * psd_project(V) * basis.transpose();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose());
  return out;
}

/// Orthonormal basis (columns) with sum_i b_i / sqrt(n) equal to the given
/// unit vector r: take a Householder frame mapping e = (1,..,1)/sqrt(n) to r
/// and apply it to a random rotation of e's stabilizer.
inline Matrix basis_for_direction(const Vector& r, Rng& rng) {
  const int n = static_cast<int>(r.size());
  // Random orthonormal matrix Q with rows summing to sqrt(n) * e1-like
  // structure: start from a QR of a random Gaussian matrix, then rotate so
  // the column sum matches r.
  Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.next_gaussian();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // s = sum of columns of q, normalized; u maps s_hat -> r by Householder.
  Vector s = q.rowwise().sum() / std::sqrt(static_cast<double>(n));
  s.normalize();
  Vector d = s - r;
  if (d.norm() < 1e-12) return q;
  d.normalize();
  const Matrix h = Matrix::Identity(n, n) - 2.0 * d * d.transpose();
  return h * q;
}

}  // namespace gmm
