#pragma once

// Shared helpers for the test suites: independent oracles (quadrature-based
// moments, exhaustive bipartitions, closed-form normal CDF) and small random
// model generators. Everything here is deliberately implementation-
// independent of the library paths it is used to check.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gmm/model.hpp"
#include "gmm/quadrature.hpp"
#include "gmm/rng.hpp"

namespace testsup {

inline double normal_cdf(double x) {
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
}

/// Quadrature oracle for E[x^i] under a univariate mixture. Integrates
/// x^i f(x) over the union of the +-14 sigma supports to a relative
/// tolerance; independent of the MGF-recurrence implementation.
inline double moment_by_quadrature(const gmm::UnivariateGmm& f, int order,
                                   double rel_tol = 1e-9) {
  double lo = 0.0, hi = 0.0;
  std::vector<double> brk;
  bool first = true;
  for (const auto& c : f.components()) {
    const double s = std::sqrt(c.g.sigma2);
    const double l = c.g.mu - 14.0 * s, h = c.g.mu + 14.0 * s;
    if (first || l < lo) lo = l;
    if (first || h > hi) hi = h;
    first = false;
    brk.push_back(c.g.mu);
    brk.push_back(c.g.mu - s);
    brk.push_back(c.g.mu + s);
  }
  const auto integrand = [&](double x) {
    return std::pow(x, order) * gmm::pdf(f, x);
  };
  // Two passes: a rough scale first, then an absolute tolerance from it.
  const auto rough = gmm::integrate_adaptive(integrand, lo, hi, 1e-4, brk);
  const double scale = std::max(std::abs(rough.value), 1.0);
  const auto fine =
      gmm::integrate_adaptive(integrand, lo, hi, rel_tol * scale, brk);
  return fine.value;
}

/// Moments of the convolution under the binomial linear map: if
/// h = g * N(0, alpha) then M_i(h) = sum_j C(i,j) M_j(g) nu_{i-j}(alpha)
/// with nu the central normal moments. Solving the triangular system gives
/// the deconvolved moments as a linear image of the input moments.
inline std::vector<double> deconvolved_moments_by_linear_map(
    const std::vector<double>& input_moments, double alpha) {
  const int n = static_cast<int>(input_moments.size());
  // nu_m(alpha): 0 for odd m, (m-1)!! alpha^{m/2} for even m.
  std::vector<double> nu(n + 1, 0.0);
  nu[0] = 1.0;
  for (int m = 2; m <= n; m += 2) {
    double dblfac = 1.0;
    for (int t = m - 1; t > 1; t -= 2) dblfac *= t;
    nu[m] = dblfac * std::pow(alpha, m / 2);
  }
  std::vector<std::vector<double>> binom(n + 1, std::vector<double>(n + 1, 0));
  for (int i = 0; i <= n; ++i) {
    binom[i][0] = 1;
    for (int j = 1; j <= i; ++j) {
      binom[i][j] = binom[i - 1][j - 1] + (j <= i - 1 ? binom[i - 1][j] : 0);
    }
  }
  std::vector<double> out(n, 0.0);  // out[i-1] = M_i of the deconvolved
  for (int i = 1; i <= n; ++i) {
    double rhs = input_moments[i - 1];
    for (int j = 0; j < i; ++j) {
      const double mj = j == 0 ? 1.0 : out[j - 1];
      rhs -= binom[i][j] * mj * nu[i - j];
    }
    out[i - 1] = rhs;  // coefficient of M_i(g) is C(i,i) nu_0 = 1
  }
  return out;
}

/// Exhaustive best bipartition gap: max over all nonempty bipartitions of
/// min cross-set distance. Oracle for the greedy construction's guarantee.
inline double best_bipartition_gap(const std::vector<double>& pts) {
  const int k = static_cast<int>(pts.size());
  double best = -1.0;
  for (unsigned mask = 1; mask + 1 < (1u << k); ++mask) {
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        if (((mask >> i) & 1) != ((mask >> j) & 1)) {
          gap = std::min(gap, std::abs(pts[i] - pts[j]));
        }
      }
    }
    best = std::max(best, gap);
  }
  return best;
}

inline gmm::UnivariateGmm random_mixture_1d(gmm::Rng& rng, int k,
                                            double mean_bound = 5.0,
                                            double var_lo = 0.1,
                                            double var_hi = 4.0) {
  std::vector<gmm::WeightedUni> comps;
  std::vector<double> ws;
  double s = 0.0;
  for (int i = 0; i < k; ++i) {
    const double w = 0.2 + rng.next_double();
    ws.push_back(w);
    s += w;
  }
  for (int i = 0; i < k; ++i) {
    const double mu = mean_bound * (2.0 * rng.next_double() - 1.0);
    const double v = var_lo + (var_hi - var_lo) * rng.next_double();
    comps.push_back({ws[i] / s, gmm::UniGaussian(mu, v)});
  }
  return gmm::UnivariateGmm(std::move(comps));
}

inline gmm::Gmm random_mixture_nd(gmm::Rng& rng, int k, int n,
                                  double mean_scale = 2.0) {
  std::vector<gmm::WeightedGaussian> comps;
  std::vector<double> ws;
  double s = 0.0;
  for (int i = 0; i < k; ++i) {
    const double w = 0.3 + rng.next_double();
    ws.push_back(w);
    s += w;
  }
  for (int i = 0; i < k; ++i) {
    gmm::Vector mu(n);
    for (int j = 0; j < n; ++j) {
      mu[j] = mean_scale * (2.0 * rng.next_double() - 1.0);
    }
    gmm::Matrix a(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a(r, c) = rng.next_gaussian();
    gmm::Matrix sigma = 0.5 * (a * a.transpose()) / n +
                        0.2 * gmm::Matrix::Identity(n, n);
    comps.push_back({ws[i] / s, gmm::Gaussian(mu, sigma)});
  }
  return gmm::Gmm(std::move(comps));
}

inline gmm::Vector random_unit(gmm::Rng& rng, int n) {
  gmm::Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.next_gaussian();
  v.normalize();
  return v;
}

}  // namespace testsup
