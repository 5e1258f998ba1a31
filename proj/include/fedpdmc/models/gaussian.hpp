#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "fedpdmc/core.hpp"
#include "fedpdmc/potential.hpp"

namespace fedpdmc {

/// U(x) = 1/2 (x - mu)' P (x - mu). Zig-Zag rates along x + t v are exactly
/// (b + a t)_+, so event times are drawn without thinning.
class GaussianSlice final : public PotentialSlice {
 public:
  GaussianSlice(Vec mu, Mat precision, std::size_t data_count = 1)
      : mu_(std::move(mu)), precision_(std::move(precision)), data_count_(data_count) {
    detail::require(precision_.rows() == precision_.cols() && precision_.rows() == mu_.size(),
                    ErrorCode::DimensionMismatch, "precision must be d x d");
    detail::require((precision_ - precision_.transpose()).cwiseAbs().maxCoeff() <=
                        1e-12 * std::max(1.0, precision_.cwiseAbs().maxCoeff()),
                    ErrorCode::InvalidArgument, "precision must be symmetric");
    if (precision_.size() > 0) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(precision_, Eigen::EigenvaluesOnly);
      spectral_norm_ = eig.eigenvalues().cwiseAbs().maxCoeff();
    }
  }

  const Vec& mean() const { return mu_; }
  const Mat& precision() const { return precision_; }

  std::size_t dim() const override { return static_cast<std::size_t>(mu_.size()); }
  std::size_t data_count() const override { return data_count_; }
  double potential(const Vec& x) const override {
    const Vec r = x - mu_;
    return 0.5 * r.dot(precision_ * r);
  }
  double partial(const Vec& x, std::size_t k) const override {
    return precision_.row(static_cast<Eigen::Index>(k)).dot(x - mu_);
  }
  Vec gradient(const Vec& x) const override { return precision_ * (x - mu_); }
  double hessian_norm_bound() const override { return spectral_norm_; }

  std::unique_ptr<Ray> ray(const Vec& x, const Vec& v) const override {
    auto out = std::make_unique<AffineRay>();
    const Vec g = precision_ * (x - mu_);
    const Vec pv = precision_ * v;
    out->b = v.cwiseProduct(g);
    out->a = v.cwiseProduct(pv);
    out->evaluations = dim() * data_count_;
    return out;
  }

 private:
  struct AffineRay final : Ray {
    Vec b;
    Vec a;
    double directional_partial(std::size_t k, double t) override {
      const auto i = static_cast<Eigen::Index>(k);
      return b[i] + a[i] * t;
    }
    double slope_bound(std::size_t k) const override { return a[static_cast<Eigen::Index>(k)]; }
    bool exact() const override { return true; }
  };

  Vec mu_;
  Mat precision_;
  std::size_t data_count_;
  double spectral_norm_ = 0.0;
};

struct RateCoefficients {
  double b = 0.0;
  double a = 0.0;
};

/// lambda_k(x + t v, v) = (b + a t)_+ with b = v_k sum_i P_ki (x_i - mu_i), a = v_k sum_i P_ki v_i.
inline RateCoefficients gaussian_rate_coeffs(const GaussianSlice& model, const Vec& x, const Vec& v, std::size_t k) {
  detail::require(k < model.dim(), ErrorCode::InvalidArgument, "coordinate out of range");
  const auto i = static_cast<Eigen::Index>(k);
  const auto row = model.precision().row(i);
  return {v[i] * row.dot(x - model.mean()), v[i] * row.dot(v)};
}

/// i.i.d. observations y_i ~ N(mu, Sigma) with a flat prior on mu, split
/// across workers. Worker m holds U_m(mu) = 1/2 sum_{i in m} (y_i - mu)' P (y_i - mu).
class GaussianMeanModel {
 public:
  GaussianMeanModel(Mat observations, Mat sigma, std::vector<std::size_t> batch_sizes)
      : y_(std::move(observations)), sigma_(std::move(sigma)), batches_(std::move(batch_sizes)) {
    detail::require(y_.rows() > 0, ErrorCode::EmptyInput, "no observations");
    detail::require(sigma_.rows() == y_.cols() && sigma_.cols() == y_.cols(), ErrorCode::DimensionMismatch,
                    "covariance must be d x d");
    std::size_t total = 0;
    for (auto n : batches_) total += n;
    detail::require(total == static_cast<std::size_t>(y_.rows()), ErrorCode::InvalidArgument,
                    "batch sizes must sum to N");
    precision_ = sigma_.inverse();
  }

  std::size_t dim() const { return static_cast<std::size_t>(y_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(y_.rows()); }
  std::size_t workers() const { return batches_.size(); }
  const std::vector<std::size_t>& batch_sizes() const { return batches_; }
  const Mat& observations() const { return y_; }

  Vec posterior_mean() const { return y_.colwise().mean().transpose(); }
  Mat posterior_covariance() const { return sigma_ / static_cast<double>(size()); }

  std::shared_ptr<GaussianSlice> worker_slice(std::size_t m) const {
    std::size_t begin = 0;
    for (std::size_t j = 0; j < m; ++j) begin += batches_[j];
    const auto n = batches_.at(m);
    const Vec mean = y_.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(n))
                         .colwise()
                         .mean()
                         .transpose();
    return std::make_shared<GaussianSlice>(mean, static_cast<double>(n) * precision_, n);
  }

 private:
  Mat y_;
  Mat sigma_;
  Mat precision_;
  std::vector<std::size_t> batches_;
};

/// Sizes of M contiguous batches of N items, differing by at most one.
inline std::vector<std::size_t> split_evenly(std::size_t n, std::size_t m) {
  detail::require(m >= 1, ErrorCode::InvalidArgument, "M must be >= 1");
  std::vector<std::size_t> sizes(m, n / m);
  for (std::size_t j = 0; j < n % m; ++j) ++sizes[j];
  return sizes;
}

}  // namespace fedpdmc
