#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gmm/model.hpp"
#include "gmm/quadrature.hpp"
#include "gmm/rng.hpp"

namespace gmm {

/// Parameter distance D_p between univariate Gaussians:
/// |mu1 - mu2| + |sigma1^2 - sigma2^2|.
inline double param_distance(const UniGaussian& a, const UniGaussian& b) {
  return std::abs(a.mu - b.mu) + std::abs(a.sigma2 - b.sigma2);
}

/// High-dimensional analogue used by subdivision checks:
/// ||mu1 - mu2|| + ||Sigma1 - Sigma2||_F.
inline double param_distance(const Gaussian& a, const Gaussian& b) {
  return (a.mu - b.mu).norm() + (a.sigma - b.sigma).norm();
}

namespace detail {

inline void support_breakpoints(const UnivariateGmm& f, double& lo, double& hi,
                                std::vector<double>& brk) {
  for (const auto& c : f.components()) {
    const double s = std::sqrt(c.g.sigma2);
    lo = std::min(lo, c.g.mu - 12.0 * s);
    hi = std::max(hi, c.g.mu + 12.0 * s);
    brk.push_back(c.g.mu);
    for (double t : {1.0, 2.0, 4.0, 8.0, 12.0}) {
      brk.push_back(c.g.mu - t * s);
      brk.push_back(c.g.mu + t * s);
    }
  }
}

}  // namespace detail

/// Total variation distance between univariate mixtures by adaptive
/// quadrature of |f - g| over the union of the +-12 sigma supports.
/// Result is clamped to [0, 1]; absolute error <= tol.
inline double stat_distance_1d(const UnivariateGmm& f, const UnivariateGmm& g,
                               double tol = 1e-8) {
  if (!(tol > 0.0)) throw std::invalid_argument("stat_distance_1d: tol <= 0");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::vector<double> brk;
  detail::support_breakpoints(f, lo, hi, brk);
  detail::support_breakpoints(g, lo, hi, brk);
  const auto diff = [&](double x) { return std::abs(pdf(f, x) - pdf(g, x)); };
  const QuadResult q = integrate_adaptive(diff, lo, hi, 2.0 * tol, brk);
  return std::clamp(0.5 * q.value, 0.0, 1.0);
}

struct TvEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t budget = 0;
};

/// Monte-Carlo estimate of the total variation distance between n-D
/// mixtures by importance sampling from the balanced mixture (f + g)/2:
/// D = E_{x~(f+g)/2} [ |f - g| / (f + g) ]. Each term lies in [0, 1], so the
/// standard error is well behaved.
inline TvEstimate stat_distance_nd(const Gmm& f, const Gmm& g, std::size_t m,
                                   std::uint64_t seed) {
  if (f.dim() != g.dim()) {
    throw std::invalid_argument("stat_distance_nd: dimension mismatch");
  }
  if (m < 1000) throw std::invalid_argument("stat_distance_nd: m < 1000");
  Rng pick(Rng::mix(seed, 0x7fb5d329728ea185ULL));
  auto xs_f = sample(f, m, Rng::mix(seed, 1));
  auto xs_g = sample(g, m, Rng::mix(seed, 2));
  double s = 0.0, s2 = 0.0;
  for (std::size_t t = 0; t < m; ++t) {
    const Vector& x = pick.next_double() < 0.5 ? xs_f[t].x : xs_g[t].x;
    const double lf = log_pdf(f, x);
    const double lg = log_pdf(g, x);
    const double mx = std::max(lf, lg);
    double y;
    if (!std::isfinite(mx)) {
      y = 0.0;
    } else {
      const double ef = std::exp(lf - mx);
      const double eg = std::exp(lg - mx);
      y = std::abs(ef - eg) / (ef + eg);
    }
    s += y;
    s2 += y * y;
  }
  TvEstimate out;
  const double mm = static_cast<double>(m);
  out.estimate = s / mm;
  out.std_error = std::sqrt(std::max(s2 / mm - out.estimate * out.estimate,
                                     0.0) / mm);
  out.budget = m;
  return out;
}

/// TV between two single n-D Gaussians (wraps stat_distance_nd).
inline TvEstimate gaussian_tv(const Gaussian& a, const Gaussian& b,
                              std::size_t m, std::uint64_t seed) {
  const Gmm fa({{1.0, a}});
  const Gmm fb({{1.0, b}});
  return stat_distance_nd(fa, fb, m, seed);
}

/// Eigenvalue upper bound on squared TV between two Gaussians:
/// D^2 <= sum_i (lambda_i + 1/lambda_i - 2) + (mu1-mu2)^T Sigma1^{-1} (mu1-mu2)
/// with lambda_i the eigenvalues of Sigma1^{-1} Sigma2. Used as a cross-check
/// only; no closed-form TV is attempted.
inline double gaussian_tv_upper_bound(const Gaussian& a, const Gaussian& b) {
  const Matrix inv = a.sigma.inverse();
  Eigen::EigenSolver<Matrix> es(inv * b.sigma);
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    const double li = es.eigenvalues()[i].real();
    if (li > 0) s += li + 1.0 / li - 2.0;
  }
  const Vector d = a.mu - b.mu;
  s += d.dot(inv * d);
  return std::sqrt(std::max(s, 0.0));
}

}  // namespace gmm
