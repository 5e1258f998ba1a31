#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "fedpdmc/core.hpp"
#include "fedpdmc/potential.hpp"

namespace fedpdmc {

/// Negative Student-t log density (up to a constant) and its derivatives.
struct StudentLoss {
  double nu = 4.0;

  double value(double z) const { return 0.5 * (nu + 1.0) * std::log1p(z * z / nu); }
  double first(double z) const { return (nu + 1.0) * z / (nu + z * z); }
  double second(double z) const {
    const double s = nu + z * z;
    return (nu + 1.0) * (nu - z * z) / (s * s);
  }
  /// sup |h''| attained at z = 0.
  double second_bound() const { return (nu + 1.0) / nu; }
  /// sup |h'| attained at z = sqrt(nu).
  double first_bound() const { return (nu + 1.0) / (2.0 * std::sqrt(nu)); }
};

/// AR(1) with Student-t noise, Y_k = c + x Y_{k-1} + eps_k, flat prior on
/// (x, c). Parameters are ordered (x, c). Each row of `trajectories` is
/// (y_0, ..., y_K).
class Ar1Slice final : public PotentialSlice {
 public:
  Ar1Slice(const Mat& trajectories, double nu) : loss_{nu} {
    detail::require(nu > 0.0, ErrorCode::InvalidArgument, "nu must be positive");
    detail::require(trajectories.rows() == 0 || trajectories.cols() >= 2, ErrorCode::InvalidArgument,
                    "trajectories need K >= 1");
    const Eigen::Index terms = trajectories.rows() * std::max<Eigen::Index>(trajectories.cols() - 1, 0);
    previous_.resize(terms);
    current_.resize(terms);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < trajectories.rows(); ++i)
      for (Eigen::Index k = 1; k < trajectories.cols(); ++k, ++j) {
        previous_[j] = trajectories(i, k - 1);
        current_[j] = trajectories(i, k);
      }
  }

  double nu() const { return loss_.nu; }
  const Vec& lagged() const { return previous_; }
  const Vec& observed() const { return current_; }

  std::size_t dim() const override { return 2; }
  std::size_t data_count() const override { return static_cast<std::size_t>(previous_.size()); }

  double potential(const Vec& p) const override {
    double u = 0.0;
    for (Eigen::Index j = 0; j < previous_.size(); ++j) u += loss_.value(residual(p, j));
    return u;
  }
  double partial(const Vec& p, std::size_t k) const override { return gradient(p)[static_cast<Eigen::Index>(k)]; }
  Vec gradient(const Vec& p) const override {
    Vec g = Vec::Zero(2);
    for (Eigen::Index j = 0; j < previous_.size(); ++j) {
      const double h1 = loss_.first(residual(p, j));
      g[0] += h1 * previous_[j];
      g[1] += h1;
    }
    return g;
  }
  Mat hessian(const Vec& p) const {
    Mat h = Mat::Zero(2, 2);
    for (Eigen::Index j = 0; j < previous_.size(); ++j) {
      const double h2 = loss_.second(residual(p, j));
      const double y = previous_[j];
      h(0, 0) += h2 * y * y;
      h(0, 1) += h2 * y;
      h(1, 1) += h2;
    }
    h(1, 0) = h(0, 1);
    return h;
  }
  /// ((nu+1)/nu) sum (1 + y_{k-1}^2), using the spectral norm of [[y^2, y], [y, 1]].
  double hessian_norm_bound() const override {
    return loss_.second_bound() * (static_cast<double>(previous_.size()) + previous_.squaredNorm());
  }

  std::unique_ptr<Ray> ray(const Vec& p, const Vec& v) const override {
    detail::require(p.size() == 2 && v.size() == 2, ErrorCode::DimensionMismatch, "AR(1) parameters are (x, c)");
    auto out = std::make_unique<Ar1Ray>(*this);
    const Eigen::Index n = previous_.size();
    out->z.resize(n);
    out->w.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      out->z[j] = residual(p, j);
      out->w[j] = v[0] * previous_[j] + v[1];
    }
    out->v = v;
    const double bound = loss_.second_bound();
    out->slopes.resize(2);
    out->slopes[0] = bound * std::abs(v[0]) * previous_.cwiseAbs().dot(out->w.cwiseAbs());
    out->slopes[1] = bound * std::abs(v[1]) * out->w.cwiseAbs().sum();
    return out;
  }

 private:
  double residual(const Vec& p, Eigen::Index j) const { return p[0] * previous_[j] + p[1] - current_[j]; }

  struct Ar1Ray final : Ray {
    explicit Ar1Ray(const Ar1Slice& s) : slice(s) {}
    const Ar1Slice& slice;
    Vec z, w, v, slopes;
    double cached_t = std::numeric_limits<double>::quiet_NaN();
    double cached[2] = {0.0, 0.0};

    double directional_partial(std::size_t k, double t) override {
      if (t != cached_t) {
        cached[0] = cached[1] = 0.0;
        for (Eigen::Index j = 0; j < z.size(); ++j) {
          const double h1 = slice.loss_.first(z[j] + t * w[j]);
          cached[0] += h1 * slice.previous_[j];
          cached[1] += h1;
        }
        cached_t = t;
      }
      evaluations += static_cast<std::uint64_t>(z.size());
      return v[static_cast<Eigen::Index>(k)] * cached[k];
    }
    double slope_bound(std::size_t k) const override { return slopes[static_cast<Eigen::Index>(k)]; }
  };

  StudentLoss loss_;
  Vec previous_;
  Vec current_;
};

struct Ar1Gradient {
  double dx = 0.0;
  double dc = 0.0;
};

inline Ar1Gradient ar1_partials(const Ar1Slice& slice, double x, double c) {
  const Vec g = slice.gradient((Vec(2) << x, c).finished());
  return {g[0], g[1]};
}

inline double ar1_hessian_bound(const Ar1Slice& slice) { return slice.hessian_norm_bound(); }

}  // namespace fedpdmc
