#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gmm/common.hpp"
#include "gmm/model.hpp"

namespace gmm {

/// Exact i-th raw moment of N(mu, sigma2) via the MGF-derivative recurrence:
/// with M(t) = exp(mu t + sigma2 t^2 / 2), the i-th derivative is
/// p_i(t) M(t) where p_{i+1} = p_i (mu + sigma2 t) + p_i'; the moment is
/// p_i(0). Orders are capped at 64 to bound coefficient growth.
inline double raw_moment(const UniGaussian& g, int order) {
  if (order < 0 || order > kMaxMomentOrder) {
    throw std::invalid_argument("raw_moment: order must be in [0, " +
                                std::to_string(kMaxMomentOrder) + "]");
  }
  if (order == 0) return 1.0;
  // coeff[j] = coefficient of t^j in p_i.
  std::vector<double> coeff{1.0};
  for (int i = 0; i < order; ++i) {
    std::vector<double> next(coeff.size() + 1, 0.0);
    for (std::size_t j = 0; j < coeff.size(); ++j) {
      next[j] += g.mu * coeff[j];
      next[j + 1] += g.sigma2 * coeff[j];
      if (j >= 1) next[j - 1] += static_cast<double>(j) * coeff[j];
    }
    coeff = std::move(next);
  }
  return coeff[0];
}

inline double mixture_moment(const UnivariateGmm& f, int order) {
  double s = 0.0;
  for (const auto& c : f.components()) s += c.w * raw_moment(c.g, order);
  return s;
}

/// Raw sample moments 1..max_order in one pass: entry i-1 = (1/m) sum x^i.
inline std::vector<double> sample_moments(const std::vector<double>& xs,
                                          int max_order) {
  if (xs.empty()) throw std::invalid_argument("sample_moments: empty input");
  if (max_order < 1 || max_order > kMaxMomentOrder) {
    throw std::invalid_argument("sample_moments: bad order");
  }
  std::vector<double> acc(max_order, 0.0);
  for (double x : xs) {
    double p = 1.0;
    for (int i = 0; i < max_order; ++i) {
      p *= x;
      acc[i] += p;
    }
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (double& a : acc) a *= inv;
  return acc;
}

/// Standard errors of the sample moments (sqrt of empirical variance / m),
/// used to floor moment-matching tolerances at the statistical noise level.
inline std::vector<double> sample_moment_stderr(const std::vector<double>& xs,
                                                int max_order) {
  const auto m1 = sample_moments(xs, max_order);
  const auto m2 = sample_moments(xs, std::min(2 * max_order, kMaxMomentOrder));
  std::vector<double> se(max_order, 0.0);
  const double m = static_cast<double>(xs.size());
  for (int i = 1; i <= max_order; ++i) {
    double var;
    if (2 * i <= kMaxMomentOrder) {
      var = m2[2 * i - 1] - m1[i - 1] * m1[i - 1];
    } else {
      var = 0.0;
    }
    se[i - 1] = std::sqrt(std::max(var, 0.0) / m);
  }
  return se;
}

namespace detail {

// Knuth TwoSum: s + e == a + b exactly.
inline void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double bv = s - a;
  e = (a - (s - bv)) + (b - bv);
}

}  // namespace detail

/// Deconvolution by a Gaussian of variance alpha: every component variance
/// becomes sigma2 - alpha, means and weights unchanged. Negative alpha is
/// convolution and is always allowed. The variance update runs in
/// compensated (double-double) arithmetic so that
/// deconvolve(convolve(f, a), a) restores f bit-exactly.
inline UnivariateGmm deconvolve(const UnivariateGmm& f, double alpha) {
  std::vector<WeightedUni> comps;
  comps.reserve(f.k());
  for (int i = 0; i < f.k(); ++i) {
    const auto& c = f.comp(i);
    if (alpha >= c.g.sigma2 + c.g.sigma2_comp) {
      throw std::invalid_argument(
          "deconvolve: alpha=" + std::to_string(alpha) +
          " >= variance of component " + std::to_string(i) + " (" +
          std::to_string(c.g.sigma2) + ")");
    }
    double s, e;
    detail::two_sum(c.g.sigma2, -alpha, s, e);
    const double lo = e + c.g.sigma2_comp;
    const double hi = s + lo;
    comps.push_back({c.w, UniGaussian(c.g.mu, hi, (s - hi) + lo)});
  }
  return UnivariateGmm(std::move(comps));
}

inline UnivariateGmm convolve(const UnivariateGmm& f, double alpha) {
  return deconvolve(f, -alpha);
}

}  // namespace gmm
