#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "fedpdmc/core.hpp"
#include "fedpdmc/models/gaussian.hpp"
#include "fedpdmc/potential.hpp"

namespace fedpdmc {

inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

/// Bernoulli-logit likelihood of one worker's batch, without prior:
/// U(x) = sum_i log(1 + exp(xi_i'x)) - eta_i xi_i'x.
class LogisticLikelihoodSlice final : public PotentialSlice {
 public:
  LogisticLikelihoodSlice(Mat covariates, Vec labels) : xi_(std::move(covariates)), eta_(std::move(labels)) {
    detail::require(xi_.rows() == eta_.size(), ErrorCode::DimensionMismatch, "one label per covariate row");
    detail::require(xi_.cols() >= 1, ErrorCode::DimensionMismatch, "covariates need at least one column");
    for (Eigen::Index i = 0; i < eta_.size(); ++i)
      detail::require(eta_[i] == 0.0 || eta_[i] == 1.0, ErrorCode::InvalidArgument, "labels must be 0 or 1");
    abs_xi_ = xi_.cwiseAbs();
  }

  const Mat& covariates() const { return xi_; }
  const Vec& labels() const { return eta_; }

  std::size_t dim() const override { return static_cast<std::size_t>(xi_.cols()); }
  std::size_t data_count() const override { return static_cast<std::size_t>(xi_.rows()); }

  double potential(const Vec& x) const override {
    const Vec z = xi_ * x;
    double u = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) u += softplus(z[i]) - eta_[i] * z[i];
    return u;
  }
  double partial(const Vec& x, std::size_t k) const override {
    const Vec z = xi_ * x;
    double g = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) g += xi_(i, static_cast<Eigen::Index>(k)) * (logistic(z[i]) - eta_[i]);
    return g;
  }
  Vec gradient(const Vec& x) const override {
    Vec r = xi_ * x;
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = logistic(r[i]) - eta_[i];
    return xi_.transpose() * r;
  }
  Mat hessian(const Vec& x) const {
    const Vec z = xi_ * x;
    Vec w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = logistic(z[i]);
      w[i] = s * (1.0 - s);
    }
    return xi_.transpose() * w.asDiagonal() * xi_;
  }

  /// 1/4 sum_i ||xi_i xi_i'||_2 = 1/4 sum_i |xi_i|_2^2.
  double hessian_norm_bound() const override { return 0.25 * xi_.rowwise().squaredNorm().sum(); }

  /// 1/4 sum_i |xi_i|_inf |xi_i|_1, the induced infinity-norm analogue.
  double hessian_norm_bound_inf() const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < xi_.rows(); ++i) total += abs_xi_.row(i).maxCoeff() * abs_xi_.row(i).sum();
    return 0.25 * total;
  }

  std::unique_ptr<Ray> ray(const Vec& x, const Vec& v) const override {
    auto out = std::make_unique<LogisticRay>(*this);
    out->z = xi_ * x;
    out->w = xi_ * v;
    out->v = v;
    // |d/ds v_k dU/dx_k| = |v_k sum_i sigma'(.) xi_ik w_i| <= |v_k| / 4 sum_i |xi_ik| |w_i|
    out->slopes = 0.25 * v.cwiseAbs().cwiseProduct(abs_xi_.transpose() * out->w.cwiseAbs());
    out->residual.resize(out->z.size());
    return out;
  }

 private:
  struct LogisticRay final : Ray {
    explicit LogisticRay(const LogisticLikelihoodSlice& s) : slice(s) {}
    const LogisticLikelihoodSlice& slice;
    Vec z, w, v, slopes, residual;
    double cached_t = std::numeric_limits<double>::quiet_NaN();

    double directional_partial(std::size_t k, double t) override {
      if (t != cached_t) {
        for (Eigen::Index i = 0; i < z.size(); ++i) residual[i] = logistic(z[i] + t * w[i]) - slice.eta_[i];
        cached_t = t;
      }
      evaluations += static_cast<std::uint64_t>(z.size());
      const auto kk = static_cast<Eigen::Index>(k);
      return v[kk] * slice.xi_.col(kk).dot(residual);
    }
    double slope_bound(std::size_t k) const override { return slopes[static_cast<Eigen::Index>(k)]; }
  };

  Mat xi_;
  Vec eta_;
  Mat abs_xi_;
};

/// Bayesian logistic regression with an optional standard normal prior,
/// data split over workers.
class LogisticModel {
 public:
  struct Batch {
    Mat covariates;
    Vec labels;
  };

  LogisticModel(std::vector<Batch> batches, bool standard_normal_prior = true)
      : has_prior_(standard_normal_prior) {
    detail::require(!batches.empty(), ErrorCode::InvalidArgument, "M must be >= 1");
    const auto d = batches.front().covariates.cols();
    for (auto& b : batches) {
      detail::require(b.covariates.cols() == d, ErrorCode::DimensionMismatch, "covariate dimension must be uniform");
      total_ += static_cast<std::size_t>(b.covariates.rows());
      slices_.push_back(std::make_shared<LogisticLikelihoodSlice>(std::move(b.covariates), std::move(b.labels)));
    }
    prior_ = std::make_shared<GaussianSlice>(Vec::Zero(d), Mat::Identity(d, d), 0);
  }

  std::size_t dim() const { return slices_.front()->dim(); }
  std::size_t workers() const { return slices_.size(); }
  std::size_t size() const { return total_; }
  bool has_prior() const { return has_prior_; }

  std::shared_ptr<const LogisticLikelihoodSlice> likelihood(std::size_t m) const { return slices_.at(m); }
  std::shared_ptr<const GaussianSlice> prior() const { return prior_; }

  /// n_m / N, worker m's default share of the prior.
  double prior_fraction(std::size_t m) const {
    if (total_ == 0) return 1.0 / static_cast<double>(slices_.size());
    return static_cast<double>(slices_.at(m)->data_count()) / static_cast<double>(total_);
  }

  double potential(const Vec& x) const {
    double u = has_prior_ ? prior_->potential(x) : 0.0;
    for (const auto& s : slices_) u += s->potential(x);
    return u;
  }
  Vec gradient(const Vec& x) const {
    Vec g = has_prior_ ? prior_->gradient(x) : Vec::Zero(x.size());
    for (const auto& s : slices_) g += s->gradient(x);
    return g;
  }

 private:
  std::vector<std::shared_ptr<LogisticLikelihoodSlice>> slices_;
  std::shared_ptr<GaussianSlice> prior_;
  std::size_t total_ = 0;
  bool has_prior_;
};

/// dU_m/dx_k with worker m carrying the n_m/N share of the prior.
inline double logistic_partial(const LogisticModel& model, std::size_t m, const Vec& x, std::size_t k) {
  detail::require(k < model.dim(), ErrorCode::InvalidArgument, "coordinate out of range");
  double g = model.likelihood(m)->partial(x, k);
  if (model.has_prior()) g += model.prior_fraction(m) * model.prior()->partial(x, k);
  return g;
}

enum class MatrixNorm { Spectral, Infinity };

/// n_m/N ||prior Hessian||_p + 1/4 sum_i ||xi_i xi_i'||_p, uniform in x.
inline double logistic_hessian_bound(const LogisticModel& model, std::size_t m, MatrixNorm norm) {
  const auto& slice = *model.likelihood(m);
  const double data = norm == MatrixNorm::Spectral ? slice.hessian_norm_bound() : slice.hessian_norm_bound_inf();
  return (model.has_prior() ? model.prior_fraction(m) : 0.0) + data;
}

}  // namespace fedpdmc
