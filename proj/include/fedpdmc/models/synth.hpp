#pragma once

#include <random>

#include "fedpdmc/core.hpp"
#include "fedpdmc/models/cox.hpp"
#include "fedpdmc/random.hpp"

namespace fedpdmc {

/// N draws of N(mean, alpha^2 I), one per row.
inline Mat synth_gaussian(std::size_t n, const Vec& mean, double alpha, RandomStream& rng) {
  Mat y(static_cast<Eigen::Index>(n), mean.size());
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index k = 0; k < y.cols(); ++k) y(i, k) = mean[k] + alpha * rng.normal();
  return y;
}

struct LogisticData {
  Mat covariates;
  Vec labels;
  Vec truth;
};

/// Covariates standard normal with a leading intercept column of ones; true
/// parameter standard normal; labels Bernoulli(logistic(xi'x)).
inline LogisticData synth_logistic(std::size_t n, std::size_t d, RandomStream& rng) {
  detail::require(d >= 1, ErrorCode::InvalidArgument, "d must be >= 1");
  LogisticData data;
  data.truth.resize(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < data.truth.size(); ++k) data.truth[k] = rng.normal();
  data.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  data.labels.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < data.covariates.rows(); ++i) {
    data.covariates(i, 0) = 1.0;
    for (Eigen::Index k = 1; k < data.covariates.cols(); ++k) data.covariates(i, k) = rng.normal();
    const double z = data.covariates.row(i).dot(data.truth);
    data.labels[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1.0 : 0.0;
  }
  return data;
}

/// N trajectories (y_0 = 0, y_1, ..., y_K) of y_k = c + x y_{k-1} + t_nu noise.
inline Mat synth_ar1(std::size_t n, std::size_t steps, double nu, double x, double c, RandomStream& rng) {
  detail::require(steps >= 1, ErrorCode::InvalidArgument, "K must be >= 1");
  detail::require(nu > 0.0, ErrorCode::InvalidArgument, "nu must be positive");
  std::student_t_distribution<double> noise(nu);
  Mat y = Mat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(steps + 1));
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index k = 1; k < y.cols(); ++k) y(i, k) = c + x * y(i, k - 1) + noise(rng);
  return y;
}

struct CoxData {
  Vec latent;
  Vec counts;
};

/// Latent field from the Gaussian prior, counts Poisson(exp(latent)).
inline CoxData synth_cox(std::size_t side, double alpha, double beta, RandomStream& rng) {
  const Mat p = cox_prior_precision(side, alpha, beta);
  Eigen::LLT<Mat> llt(p);
  Vec z(p.rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
  CoxData data;
  data.latent = llt.matrixU().solve(z);  // covariance (L L')^{-1}
  data.counts.resize(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    std::poisson_distribution<long> draw(std::exp(data.latent[k]));
    data.counts[k] = static_cast<double>(draw(rng));
  }
  return data;
}

}  // namespace fedpdmc
