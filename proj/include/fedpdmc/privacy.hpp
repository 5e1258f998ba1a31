#pragma once

#include <cmath>

#include "fedpdmc/error.hpp"

namespace fedpdmc {

/// Smallest refreshment rate giving (epsilon, delta)-indistinguishability of
/// one proposed event time when neighbouring rates differ by at most K:
/// rho = K (1 + log(1/delta)) / epsilon.
inline double min_refreshment_rate(double epsilon, double delta, double sensitivity) {
  detail::require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
  detail::require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
  detail::require(sensitivity >= 0.0, ErrorCode::InvalidArgument, "sensitivity K must be nonnegative");
  return sensitivity * (1.0 + std::log(1.0 / delta)) / epsilon;
}

inline bool privacy_feasible(double rho, double sensitivity, double epsilon) {
  if (sensitivity == 0.0) return true;
  return rho > 0.0 && epsilon > std::log1p(sensitivity / rho);
}

/// delta = exp(-(rho/K) [epsilon - log(1 + K/rho)]); 0 when K = 0.
inline double achieved_delta(double rho, double sensitivity, double epsilon) {
  detail::require(epsilon > 0.0, ErrorCode::InvalidArgument, "epsilon must be positive");
  detail::require(sensitivity >= 0.0, ErrorCode::InvalidArgument, "sensitivity K must be nonnegative");
  if (sensitivity == 0.0) return 0.0;
  detail::require(rho > 0.0, ErrorCode::InvalidArgument, "rho must be positive");
  const double gap = epsilon - std::log1p(sensitivity / rho);
  if (!(gap > 0.0))
    throw Error(ErrorCode::InfeasibleEpsilon, "epsilon must exceed log(1 + K/rho) = " +
                                                  std::to_string(std::log1p(sensitivity / rho)));
  return std::exp(-(rho / sensitivity) * gap);
}

/// Rate sensitivity of the logistic Zig-Zag worker to one observation:
/// |<xi, v>| <= |xi| |v|.
inline double logistic_sensitivity(double covariate_bound, double velocity_norm) {
  detail::require(covariate_bound >= 0.0, ErrorCode::InvalidArgument, "covariate bound must be nonnegative");
  detail::require(velocity_norm > 0.0, ErrorCode::InvalidArgument, "velocity norm must be positive");
  return covariate_bound * velocity_norm;
}

/// Ratio of the first-event-time densities under constant rates a and b at t.
inline double exponential_density_ratio(double rate_a, double rate_b, double t) {
  detail::require(rate_a > 0.0 && rate_b > 0.0 && t >= 0.0, ErrorCode::InvalidArgument,
                  "positive rates and t >= 0 required");
  return (rate_a / rate_b) * std::exp(-(rate_a - rate_b) * t);
}

}  // namespace fedpdmc
