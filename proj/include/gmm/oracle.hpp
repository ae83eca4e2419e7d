#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "gmm/model.hpp"
#include "gmm/rng.hpp"

namespace gmm {

/// Invertible affine map y = lin * (x + shift). Applying the isotropizing
/// transform to samples or to model parameters must commute, so both forms
/// live here.
struct AffineTransform {
  Vector shift;
  Matrix lin;

  Vector apply(const Vector& x) const { return lin * (x + shift); }

  Vector invert(const Vector& y) const {
    return lin.fullPivLu().solve(y) - shift;
  }

  double condition_number() const {
    Eigen::JacobiSVD<Matrix> svd(lin);
    const auto& sv = svd.singularValues();
    return sv(0) / sv(sv.size() - 1);
  }

  static AffineTransform identity(int n) {
    return {Vector::Zero(n), Matrix::Identity(n, n)};
  }

  Gmm apply(const Gmm& f) const {
    std::vector<WeightedGaussian> comps;
    comps.reserve(f.k());
    for (const auto& c : f.components()) {
      Matrix s = lin * c.g.sigma * lin.transpose();
      s = 0.5 * (s + s.transpose());  // rounding at extreme eigenvalue ratios
      comps.push_back({c.w, Gaussian(lin * (c.g.mu + shift), std::move(s))});
    }
    return Gmm(std::move(comps));
  }

  Gmm invert(const Gmm& f) const {
    const Matrix inv = lin.inverse();
    std::vector<WeightedGaussian> comps;
    comps.reserve(f.k());
    for (const auto& c : f.components()) {
      Matrix s = inv * c.g.sigma * inv.transpose();
      s = 0.5 * (s + s.transpose());
      comps.push_back({c.w, Gaussian(inv * c.g.mu - shift, std::move(s))});
    }
    return Gmm(std::move(comps));
  }
};

/// Transform placing a mixture in exactly isotropic position (analytic form,
/// used by fixture construction; the sample-based variant lives with the
/// clustering code).
inline AffineTransform isotropizing_transform(const Gmm& f) {
  const Vector mean = f.mean();
  const Matrix cov = f.covariance();
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  if (es.eigenvalues().minCoeff() <= 1e-12) {
    throw std::invalid_argument(
        "isotropizing_transform: mixture covariance is singular");
  }
  const Vector inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  const Matrix lin = es.eigenvectors() * inv_sqrt.asDiagonal() *
                     es.eigenvectors().transpose();
  return {-mean, lin};
}

/// Abstract i.i.d. sample source. Identical seed gives an identical stream,
/// bit-exact; fork(i) derives an independent stream without disturbing this
/// one.
class SampleOracle {
 public:
  virtual ~SampleOracle() = default;
  virtual int dim() const = 0;
  virtual LabeledSample next() = 0;
  virtual std::unique_ptr<SampleOracle> fork(std::uint64_t stream) const = 0;

  std::vector<LabeledSample> draw(std::size_t m) {
    std::vector<LabeledSample> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(next());
    return out;
  }
};

/// Samples from a fixed model.
class ModelOracle final : public SampleOracle {
 public:
  ModelOracle(Gmm model, std::uint64_t seed)
      : model_(std::move(model)), rng_(seed), seed_(seed) {
    for (const auto& c : model_.components()) {
      weights_.push_back(c.w);
      factors_.push_back(detail::covariance_factor(c.g.sigma));
    }
  }

  int dim() const override { return model_.dim(); }

  LabeledSample next() override {
    const int i = detail::pick_component(weights_, rng_);
    Vector z(dim());
    for (int j = 0; j < dim(); ++j) z[j] = rng_.next_gaussian();
    return {model_.comp(i).g.mu + factors_[i] * z, i};
  }

  std::unique_ptr<SampleOracle> fork(std::uint64_t stream) const override {
    return std::make_unique<ModelOracle>(model_, Rng::mix(seed_, stream));
  }

  const Gmm& model() const { return model_; }

 private:
  Gmm model_;
  Rng rng_;
  std::uint64_t seed_;
  std::vector<double> weights_;
  std::vector<Matrix> factors_;
};

/// Bootstrap resampling from a materialized sample set; stands in for an
/// oracle when a recursion level only has a finite subset to work with.
class DatasetOracle final : public SampleOracle {
 public:
  DatasetOracle(std::shared_ptr<const std::vector<LabeledSample>> data,
                std::uint64_t seed)
      : data_(std::move(data)), rng_(seed), seed_(seed) {
    if (data_->empty()) {
      throw std::invalid_argument("DatasetOracle: empty dataset");
    }
  }

  int dim() const override {
    return static_cast<int>(data_->front().x.size());
  }

  LabeledSample next() override {
    const std::size_t i = rng_.next_u64() % data_->size();
    return (*data_)[i];
  }

  std::unique_ptr<SampleOracle> fork(std::uint64_t stream) const override {
    return std::make_unique<DatasetOracle>(data_, Rng::mix(seed_, stream));
  }

  const std::vector<LabeledSample>& data() const { return *data_; }

 private:
  std::shared_ptr<const std::vector<LabeledSample>> data_;
  Rng rng_;
  std::uint64_t seed_;
};

/// Applies an affine transform to every sample of a base oracle.
class TransformedOracle final : public SampleOracle {
 public:
  TransformedOracle(std::unique_ptr<SampleOracle> base, AffineTransform t)
      : base_(std::move(base)), t_(std::move(t)) {}

  int dim() const override { return base_->dim(); }

  LabeledSample next() override {
    LabeledSample s = base_->next();
    s.x = t_.apply(s.x);
    return s;
  }

  std::unique_ptr<SampleOracle> fork(std::uint64_t stream) const override {
    return std::make_unique<TransformedOracle>(base_->fork(stream), t_);
  }

 private:
  std::unique_ptr<SampleOracle> base_;
  AffineTransform t_;
};

/// Adds independent N(0, noise_var * I) noise per sample (convolution).
class NoisyOracle final : public SampleOracle {
 public:
  NoisyOracle(std::unique_ptr<SampleOracle> base, double noise_var,
              std::uint64_t seed)
      : base_(std::move(base)), sd_(std::sqrt(noise_var)), rng_(seed),
        seed_(seed), var_(noise_var) {}

  int dim() const override { return base_->dim(); }

  LabeledSample next() override {
    LabeledSample s = base_->next();
    for (int j = 0; j < s.x.size(); ++j) s.x[j] += sd_ * rng_.next_gaussian();
    return s;
  }

  std::unique_ptr<SampleOracle> fork(std::uint64_t stream) const override {
    return std::make_unique<NoisyOracle>(base_->fork(stream), var_,
                                         Rng::mix(seed_, stream));
  }

 private:
  std::unique_ptr<SampleOracle> base_;
  double sd_;
  Rng rng_;
  std::uint64_t seed_;
  double var_;
};

// ---------------------------------------------------------------------------
// 1-D batch sources for the univariate algorithms
// ---------------------------------------------------------------------------

/// Batch interface consumed by the univariate learners. draw_convolved
/// returns the same stream with N(0, 1/2) noise added; implementations that
/// share an underlying sample pool across directions must also share the
/// noise table so the reconstruction algebra sees correlated errors cancel.
class BatchSource1D {
 public:
  virtual ~BatchSource1D() = default;
  virtual std::vector<double> draw(std::size_t m, std::uint64_t stream) = 0;
  virtual std::vector<double> draw_convolved(std::size_t m,
                                             std::uint64_t stream) = 0;
};

class ModelSource1D final : public BatchSource1D {
 public:
  ModelSource1D(UnivariateGmm model, std::uint64_t seed)
      : model_(std::move(model)), seed_(seed) {}

  std::vector<double> draw(std::size_t m, std::uint64_t stream) override {
    return raw(m, stream, 0.0);
  }

  std::vector<double> draw_convolved(std::size_t m,
                                     std::uint64_t stream) override {
    return raw(m, stream, 0.5);
  }

 private:
  std::vector<double> raw(std::size_t m, std::uint64_t stream,
                          double noise_var) {
    Rng rng(Rng::mix(seed_, stream));
    std::vector<double> ws;
    for (const auto& c : model_.components()) ws.push_back(c.w);
    std::vector<double> out;
    out.reserve(m);
    const double nsd = std::sqrt(noise_var);
    for (std::size_t t = 0; t < m; ++t) {
      const int i = detail::pick_component(ws, rng);
      const auto& g = model_.comp(i).g;
      double x = g.mu + std::sqrt(g.sigma2) * rng.next_gaussian();
      if (noise_var > 0.0) x += nsd * rng.next_gaussian();
      out.push_back(x);
    }
    return out;
  }

  UnivariateGmm model_;
  std::uint64_t seed_;
};

/// Bootstrap batches from a fixed vector of 1-D values.
class DatasetSource1D final : public BatchSource1D {
 public:
  DatasetSource1D(std::vector<double> xs, std::uint64_t seed)
      : xs_(std::move(xs)), seed_(seed) {
    if (xs_.empty()) throw std::invalid_argument("DatasetSource1D: empty");
  }

  std::vector<double> draw(std::size_t m, std::uint64_t stream) override {
    Rng rng(Rng::mix(seed_, stream));
    std::vector<double> out;
    out.reserve(m);
    for (std::size_t t = 0; t < m; ++t) {
      out.push_back(xs_[rng.next_u64() % xs_.size()]);
    }
    return out;
  }

  std::vector<double> draw_convolved(std::size_t m,
                                     std::uint64_t stream) override {
    Rng rng(Rng::mix(seed_, ~stream));
    auto out = draw(m, stream);
    const double nsd = std::sqrt(0.5);
    for (double& x : out) x += nsd * rng.next_gaussian();
    return out;
  }

 private:
  std::vector<double> xs_;
  std::uint64_t seed_;
};

/// Shared n-D sample pool projected onto one direction. All directions of a
/// reconstruction round view the same pool and the same noise table, so the
/// finite-difference algebra in Solve operates on correlated statistics.
class PoolProjectionSource final : public BatchSource1D {
 public:
  struct Pool {
    std::vector<Vector> xs;
    std::vector<double> noise;  // pre-drawn N(0, 1/2) values, one per sample

    Pool(SampleOracle& oracle, std::size_t m, std::uint64_t seed) {
      xs.reserve(m);
      for (std::size_t t = 0; t < m; ++t) xs.push_back(oracle.next().x);
      Rng rng(Rng::mix(seed, 0x6a09e667f3bcc909ULL));
      noise.resize(m);
      const double nsd = std::sqrt(0.5);
      for (auto& z : noise) z = nsd * rng.next_gaussian();
    }
  };

  PoolProjectionSource(std::shared_ptr<const Pool> pool, Vector direction)
      : pool_(std::move(pool)), dir_(std::move(direction)) {}

  std::vector<double> draw(std::size_t m, std::uint64_t) override {
    return project(m, false);
  }

  std::vector<double> draw_convolved(std::size_t m, std::uint64_t) override {
    return project(m, true);
  }

 private:
  std::vector<double> project(std::size_t m, bool noisy) const {
    const std::size_t take = std::min(m, pool_->xs.size());
    std::vector<double> out;
    out.reserve(take);
    for (std::size_t t = 0; t < take; ++t) {
      double v = dir_.dot(pool_->xs[t]);
      if (noisy) v += pool_->noise[t];
      out.push_back(v);
    }
    return out;
  }

  std::shared_ptr<const Pool> pool_;
  Vector dir_;
};

}  // namespace gmm
