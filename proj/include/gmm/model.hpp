#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gmm/common.hpp"
#include "gmm/rng.hpp"

namespace gmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One univariate Gaussian component, N(mu, sigma2).
///
/// sigma2_comp is a compensation term maintained by the deconvolution
/// operator (true variance = sigma2 + sigma2_comp, |comp| <= ulp(sigma2)/2).
/// It keeps convolve/deconvolve an exactly invertible pair; nothing else
/// reads it.
struct UniGaussian {
  double mu = 0.0;
  double sigma2 = 1.0;
  double sigma2_comp = 0.0;

  UniGaussian() = default;
  UniGaussian(double m, double s2, double comp = 0.0)
      : mu(m), sigma2(s2), sigma2_comp(comp) {
    if (!(sigma2 > 0.0)) {
      throw std::invalid_argument("UniGaussian: variance must be positive");
    }
  }
};

struct WeightedUni {
  double w;
  UniGaussian g;
};

/// Weighted list of 1-D Gaussians. Weights must be positive and sum to 1
/// within 1e-9; component order is meaningful (estimates keep it stable).
class UnivariateGmm {
 public:
  UnivariateGmm() = default;
  explicit UnivariateGmm(std::vector<WeightedUni> comps)
      : components_(std::move(comps)) {
    validate();
  }

  int k() const { return static_cast<int>(components_.size()); }
  const std::vector<WeightedUni>& components() const { return components_; }
  const WeightedUni& comp(int i) const { return components_[i]; }

  double mean() const {
    double m = 0.0;
    for (const auto& c : components_) m += c.w * c.g.mu;
    return m;
  }

  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (const auto& c : components_) {
      s += c.w * (c.g.sigma2 + c.g.mu * c.g.mu);
    }
    return s - m * m;
  }

  double min_variance() const {
    double v = components_.front().g.sigma2;
    for (const auto& c : components_) v = std::min(v, c.g.sigma2);
    return v;
  }

 private:
  void validate() const {
    if (components_.empty()) {
      throw std::invalid_argument("UnivariateGmm: needs at least 1 component");
    }
    double s = 0.0;
    for (const auto& c : components_) {
      if (!(c.w > 0.0)) {
        throw std::invalid_argument("UnivariateGmm: weights must be positive");
      }
      if (!(c.g.sigma2 > 0.0)) {
        throw std::invalid_argument("UnivariateGmm: variances must be positive");
      }
      s += c.w;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw std::invalid_argument("UnivariateGmm: weights sum to " +
                                  std::to_string(s) + ", expected 1");
    }
  }

  std::vector<WeightedUni> components_;
};

/// One n-dimensional Gaussian: mean vector plus symmetric PSD covariance.
struct Gaussian {
  Vector mu;
  Matrix sigma;

  Gaussian() = default;
  Gaussian(Vector m, Matrix s) : mu(std::move(m)), sigma(std::move(s)) {
    if (sigma.rows() != sigma.cols() || sigma.rows() != mu.size()) {
      throw std::invalid_argument("Gaussian: dimension mismatch");
    }
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("Gaussian: covariance not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      throw std::invalid_argument("Gaussian: covariance not PSD (min eig " +
                                  std::to_string(es.eigenvalues().minCoeff()) +
                                  ")");
    }
  }

  int dim() const { return static_cast<int>(mu.size()); }
};

struct WeightedGaussian {
  double w;
  Gaussian g;
};

/// Weighted list of n-D Gaussians; the learning target.
class Gmm {
 public:
  Gmm() = default;
  explicit Gmm(std::vector<WeightedGaussian> comps)
      : components_(std::move(comps)) {
    validate();
  }

  int k() const { return static_cast<int>(components_.size()); }
  int dim() const { return components_.front().g.dim(); }
  const std::vector<WeightedGaussian>& components() const {
    return components_;
  }
  const WeightedGaussian& comp(int i) const { return components_[i]; }

  Vector mean() const {
    Vector m = Vector::Zero(dim());
    for (const auto& c : components_) m += c.w * c.g.mu;
    return m;
  }

  Matrix covariance() const {
    const Vector m = mean();
    Matrix s = Matrix::Zero(dim(), dim());
    for (const auto& c : components_) {
      const Vector d = c.g.mu - m;
      s += c.w * (c.g.sigma + d * d.transpose());
    }
    return s;
  }

 private:
  void validate() const {
    if (components_.empty()) {
      throw std::invalid_argument("Gmm: needs at least 1 component");
    }
    const int n = components_.front().g.dim();
    double s = 0.0;
    for (const auto& c : components_) {
      if (c.g.dim() != n) {
        throw std::invalid_argument("Gmm: components disagree on dimension");
      }
      if (!(c.w > 0.0)) {
        throw std::invalid_argument("Gmm: weights must be positive");
      }
      s += c.w;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw std::invalid_argument("Gmm: weights sum to " + std::to_string(s) +
                                  ", expected 1");
    }
  }

  std::vector<WeightedGaussian> components_;
};

/// A sample point with the generating component recorded when known
/// (synthetic data only); label is -1 when absent.
struct LabeledSample {
  Vector x;
  int label = -1;
};

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

inline double log_pdf(const UniGaussian& g, double x) {
  const double d = x - g.mu;
  return -0.5 * (std::log(2.0 * std::numbers::pi * g.sigma2) +
                 d * d / g.sigma2);
}

inline double pdf(const UniGaussian& g, double x) {
  return std::exp(log_pdf(g, x));
}

inline double pdf(const UnivariateGmm& f, double x) {
  double s = 0.0;
  for (const auto& c : f.components()) s += c.w * pdf(c.g, x);
  return s;
}

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
  double m = v.front();
  for (double t : v) m = std::max(m, t);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : v) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace detail

/// Log-density of one n-D Gaussian; robust for points far in the tails.
inline double log_pdf(const Gaussian& g, const Vector& x) {
  if (x.size() != g.mu.size()) {
    throw std::invalid_argument("log_pdf: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(g.sigma);
  if (llt.info() != Eigen::Success) {
    // PSD but numerically singular; fall back to a floored eigen route.
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.sigma);
    Vector ev = es.eigenvalues().cwiseMax(1e-300);
    const Vector d = es.eigenvectors().transpose() * (x - g.mu);
    double quad = 0.0, logdet = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
      quad += d[i] * d[i] / ev[i];
      logdet += std::log(ev[i]);
    }
    return -0.5 * (g.dim() * std::log(2.0 * std::numbers::pi) + logdet + quad);
  }
  const Vector d = x - g.mu;
  const Vector y = llt.matrixL().solve(d);
  double logdet = 0.0;
  for (int i = 0; i < g.dim(); ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * (g.dim() * std::log(2.0 * std::numbers::pi) + y.squaredNorm()) -
         logdet;
}

inline double log_pdf(const Gmm& f, const Vector& x) {
  std::vector<double> terms;
  terms.reserve(f.k());
  for (const auto& c : f.components()) {
    terms.push_back(std::log(c.w) + log_pdf(c.g, x));
  }
  return detail::log_sum_exp(terms);
}

inline double pdf(const Gmm& f, const Vector& x) {
  return std::exp(log_pdf(f, x));
}

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

inline constexpr double kProjectionVarianceFloor = 1e-300;

/// Projection of a mixture along an arbitrary (not necessarily unit) vector:
/// component i maps to N(r·mu_i, r^T Sigma_i r). Used by the reconstruction
/// algebra, which wants literal dot products for its offset directions.
inline UnivariateGmm project_along(const Gmm& f, const Vector& r) {
  if (r.size() != f.dim()) {
    throw std::invalid_argument("project: dimension mismatch");
  }
  std::vector<WeightedUni> comps;
  comps.reserve(f.k());
  for (const auto& c : f.components()) {
    const double m = r.dot(c.g.mu);
    const double v =
        std::max(r.dot(c.g.sigma * r), kProjectionVarianceFloor);
    comps.push_back({c.w, UniGaussian(m, v)});
  }
  return UnivariateGmm(std::move(comps));
}

/// Projection onto a unit vector (checked to 1e-9).
inline UnivariateGmm project(const Gmm& f, const Vector& r) {
  if (std::abs(r.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("project: direction must be a unit vector");
  }
  return project_along(f, r);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

namespace detail {

/// Square root factor of a PSD covariance (Cholesky; eigen fallback when the
/// matrix is PSD-singular).
inline Matrix covariance_factor(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal();
}

inline int pick_component(const std::vector<double>& weights, Rng& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace detail

inline std::vector<LabeledSample> sample(const Gmm& f, std::size_t m,
                                         std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("sample: m must be >= 1");
  Rng rng(seed);
  std::vector<double> ws;
  std::vector<Matrix> factors;
  ws.reserve(f.k());
  factors.reserve(f.k());
  for (const auto& c : f.components()) {
    ws.push_back(c.w);
    factors.push_back(detail::covariance_factor(c.g.sigma));
  }
  std::vector<LabeledSample> out;
  out.reserve(m);
  const int n = f.dim();
  for (std::size_t t = 0; t < m; ++t) {
    const int i = detail::pick_component(ws, rng);
    Vector z(n);
    for (int j = 0; j < n; ++j) z[j] = rng.next_gaussian();
    out.push_back({f.comp(i).g.mu + factors[i] * z, i});
  }
  return out;
}

inline std::vector<LabeledSample> sample(const UnivariateGmm& f, std::size_t m,
                                         std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("sample: m must be >= 1");
  Rng rng(seed);
  std::vector<double> ws;
  ws.reserve(f.k());
  for (const auto& c : f.components()) ws.push_back(c.w);
  std::vector<LabeledSample> out;
  out.reserve(m);
  for (std::size_t t = 0; t < m; ++t) {
    const int i = detail::pick_component(ws, rng);
    const auto& g = f.comp(i).g;
    Vector x(1);
    x[0] = g.mu + std::sqrt(g.sigma2) * rng.next_gaussian();
    out.push_back({std::move(x), i});
  }
  return out;
}

}  // namespace gmm
