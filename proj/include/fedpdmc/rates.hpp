#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <type_traits>
#include <variant>
#include <vector>

#include "fedpdmc/core.hpp"
#include "fedpdmc/error.hpp"
#include "fedpdmc/random.hpp"

namespace fedpdmc {

/// Sentinel for "no event before the horizon".
inline constexpr double kNever = std::numeric_limits<double>::infinity();

/// Upper envelope t -> lambda_bar(t), t >= 0, with closed-form integral.
class RateBound {
 public:
  struct Constant {
    double c = 0.0;
  };
  /// t -> (b + a t)_+
  struct Affine {
    double b = 0.0;
    double a = 0.0;
  };
  /// t -> (c exp(x0 + v0 t))_+
  struct ExpLinear {
    double c = 0.0;
    double x0 = 0.0;
    double v0 = 0.0;
  };
  struct Sum {
    std::vector<RateBound> terms;
  };
  using Kind = std::variant<Constant, Affine, ExpLinear, Sum>;

  RateBound() : kind_(Constant{}) {}
  RateBound(Kind kind) : kind_(std::move(kind)) {}

  static RateBound constant(double c) { return RateBound(Constant{c}); }
  static RateBound affine(double b, double a) { return RateBound(Affine{b, a}); }
  static RateBound exp_linear(double c, double x0, double v0) { return RateBound(ExpLinear{c, x0, v0}); }
  static RateBound sum(std::vector<RateBound> terms) { return RateBound(Sum{std::move(terms)}); }

  const Kind& kind() const { return kind_; }
  bool is_sum() const { return std::holds_alternative<Sum>(kind_); }

  double value(double t) const {
    return std::visit(
        [t](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            return std::max(k.c, 0.0);
          } else if constexpr (std::is_same_v<K, Affine>) {
            return std::max(k.b + k.a * t, 0.0);
          } else if constexpr (std::is_same_v<K, ExpLinear>) {
            return k.c > 0.0 ? k.c * std::exp(k.x0 + k.v0 * t) : 0.0;
          } else {
            double total = 0.0;
            for (const auto& term : k.terms) total += term.value(t);
            return total;
          }
        },
        kind_);
  }

  /// Integral of the envelope over [0, t].
  double integrated(double t) const {
    if (t <= 0.0) return 0.0;
    return std::visit(
        [t](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            return std::max(k.c, 0.0) * t;
          } else if constexpr (std::is_same_v<K, Affine>) {
            return affine_integral(k, t);
          } else if constexpr (std::is_same_v<K, ExpLinear>) {
            if (k.c <= 0.0) return 0.0;
            const double scale = k.c * std::exp(k.x0);
            if (k.v0 == 0.0) return scale * t;
            return scale * std::expm1(k.v0 * t) / k.v0;
          } else {
            double total = 0.0;
            for (const auto& term : k.terms) total += term.integrated(t);
            return total;
          }
        },
        kind_);
  }

  /// Integral over [0, infinity).
  double total_mass() const {
    return std::visit(
        [](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            return k.c > 0.0 ? kNever : 0.0;
          } else if constexpr (std::is_same_v<K, Affine>) {
            if (k.a > 0.0) return kNever;
            if (k.a == 0.0) return k.b > 0.0 ? kNever : 0.0;
            return k.b > 0.0 ? k.b * k.b / (-2.0 * k.a) : 0.0;
          } else if constexpr (std::is_same_v<K, ExpLinear>) {
            if (k.c <= 0.0) return 0.0;
            if (k.v0 >= 0.0) return kNever;
            return k.c * std::exp(k.x0) / (-k.v0);
          } else {
            double total = 0.0;
            for (const auto& term : k.terms) total += term.total_mass();
            return total;
          }
        },
        kind_);
  }

 private:
  static double affine_integral(const Affine& k, double t) {
    if (k.a == 0.0) return std::max(k.b, 0.0) * t;
    if (k.a > 0.0) {
      if (k.b >= 0.0) return k.b * t + 0.5 * k.a * t * t;
      const double zero = -k.b / k.a;
      if (t <= zero) return 0.0;
      const double s = t - zero;
      return 0.5 * k.a * s * s;
    }
    if (k.b <= 0.0) return 0.0;
    const double s = std::min(t, k.b / -k.a);
    return k.b * s + 0.5 * k.a * s * s;
  }

  Kind kind_;
};

namespace detail {

// Smallest t with b t + a t^2 / 2 = y, for the branch where the root exists.
inline double affine_root(double b, double a, double y) {
  const double disc = std::max(b * b + 2.0 * a * y, 0.0);
  const double denom = b + std::sqrt(disc);
  return denom > 0.0 ? 2.0 * y / denom : kNever;
}

inline double invert_sum_numerically(const RateBound& bound, double y) {
  if (bound.total_mass() < y) return kNever;
  double lo = 0.0;
  double hi = 1.0;
  while (bound.integrated(hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi) || hi > 1e300) return kNever;
  }
  // Safeguarded Newton on a monotone function.
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = bound.integrated(t) - y;
    if (std::abs(f) <= 1e-14 * std::max(1.0, y)) return t;
    if (f > 0.0)
      hi = t;
    else
      lo = t;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    const double slope = bound.value(t);
    double next = slope > 0.0 ? t - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    t = next;
  }
  return hi;
}

}  // namespace detail

/// H(y) = inf{ t >= 0 : integral_0^t lambda_bar >= y }; kNever when the
/// total mass is below y.
inline double bound_invert(const RateBound& bound, double y) {
  detail::require(y >= 0.0, ErrorCode::InvalidArgument, "bound_invert requires y >= 0");
  if (y == 0.0) return 0.0;
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, RateBound::Constant>) {
          return k.c > 0.0 ? y / k.c : kNever;
        } else if constexpr (std::is_same_v<K, RateBound::Affine>) {
          if (k.a == 0.0) return k.b > 0.0 ? y / k.b : kNever;
          if (k.a > 0.0) {
            if (k.b >= 0.0) return detail::affine_root(k.b, k.a, y);
            return -k.b / k.a + std::sqrt(2.0 * y / k.a);
          }
          if (k.b <= 0.0) return kNever;
          const double mass = k.b * k.b / (-2.0 * k.a);
          if (y > mass) return kNever;
          return std::min(detail::affine_root(k.b, k.a, y), k.b / -k.a);
        } else if constexpr (std::is_same_v<K, RateBound::ExpLinear>) {
          if (k.c <= 0.0) return kNever;
          const double scale = k.c * std::exp(k.x0);
          if (k.v0 == 0.0) return y / scale;
          const double arg = y * k.v0 / scale;
          if (arg <= -1.0) return kNever;
          return std::log1p(arg) / k.v0;
        } else {
          if (k.terms.size() == 1) return bound_invert(k.terms.front(), y);
          return detail::invert_sum_numerically(bound, y);
        }
      },
      bound.kind());
}

/// A valid envelope for lambda(x + v t, v) with a globally bounded Hessian.
inline RateBound affine_bound_from_hessian(double lambda0, double hessian_norm, const Vec& v) {
  detail::require(lambda0 >= 0.0 && hessian_norm >= 0.0, ErrorCode::InvalidArgument,
                  "lambda0 and hessian_norm must be nonnegative");
  const double slope = hessian_norm * v.squaredNorm();
  if (slope == 0.0) return RateBound::constant(lambda0);
  return RateBound::affine(lambda0, slope);
}

/// Coordinatewise variant: slope = ||H||_p ||v||_p |v_i|.
inline RateBound affine_bound_from_hessian(double lambda0, double hessian_norm_p, double velocity_norm_p,
                                           double velocity_i) {
  detail::require(lambda0 >= 0.0 && hessian_norm_p >= 0.0, ErrorCode::InvalidArgument,
                  "lambda0 and hessian_norm must be nonnegative");
  const double slope = hessian_norm_p * velocity_norm_p * std::abs(velocity_i);
  if (slope == 0.0) return RateBound::constant(lambda0);
  return RateBound::affine(lambda0, slope);
}

struct EventOutcome {
  double tau = kNever;
  std::size_t proposals_used = 0;

  bool finite() const { return std::isfinite(tau); }
};

enum class BoundRefresh {
  Recompute,     // rebuild the envelope at the advanced state after each rejection
  KeepOriginal,  // keep the first envelope for the whole simulation
};

enum class SumSampling {
  Invert,        // invert the summed integrated envelope
  ComponentMin,  // first arrival of each component, then the minimum
};

struct ThinningOptions {
  BoundRefresh refresh = BoundRefresh::Recompute;
  SumSampling sum_sampling = SumSampling::ComponentMin;
  double accept_tolerance = 1e-9;
};

/// Next arrival strictly after `from` (measured on the envelope's own clock),
/// returned on the same clock.
inline double next_envelope_arrival(const RateBound& bound, double from, RandomStream& rng, SumSampling sampling) {
  if (const auto* sum = std::get_if<RateBound::Sum>(&bound.kind());
      sum != nullptr && sampling == SumSampling::ComponentMin) {
    double best = kNever;
    for (const auto& term : sum->terms) best = std::min(best, next_envelope_arrival(term, from, rng, sampling));
    return best;
  }
  const double y = rng.exponential();
  if (from == 0.0) return bound_invert(bound, y);
  const double t = bound_invert(bound, bound.integrated(from) + y);
  return std::isfinite(t) ? std::max(t, from) : kNever;
}

/// Poisson thinning. `rate(t)` is the true intensity t units along the flow;
/// `bound_at(t0)` returns an envelope for s -> rate(t0 + s). Events after
/// `horizon` are reported as kNever.
template <class RateFn, class BoundFn>
  requires std::is_invocable_r_v<RateBound, BoundFn&, double>
EventOutcome simulate_event_time(RateFn&& rate, BoundFn&& bound_at, RandomStream& rng, double horizon,
                                 const ThinningOptions& options = {}) {
  detail::require(horizon >= 0.0, ErrorCode::InvalidArgument, "horizon must be nonnegative");
  EventOutcome outcome;
  if (horizon == 0.0) return outcome;
  RateBound bound = bound_at(0.0);
  double origin = 0.0;
  double elapsed = 0.0;
  for (;;) {
    const double local = next_envelope_arrival(bound, elapsed - origin, rng, options.sum_sampling);
    ++outcome.proposals_used;
    if (!std::isfinite(local)) return outcome;
    const double t = origin + local;
    if (t > horizon) return outcome;
    const double lambda = rate(t);
    const double envelope = bound.value(local);
    if (lambda > envelope * (1.0 + options.accept_tolerance))
      throw AcceptRatioExceeded(envelope > 0.0 ? lambda / envelope : kNever);
    elapsed = t;
    if (lambda > 0.0 && rng.uniform() * envelope < lambda) {
      outcome.tau = t;
      return outcome;
    }
    if (options.refresh == BoundRefresh::Recompute) {
      bound = bound_at(t);
      origin = t;
    }
  }
}

/// Fixed envelope variant.
template <class RateFn>
EventOutcome simulate_event_time(RateFn&& rate, const RateBound& bound, RandomStream& rng, double horizon,
                                 const ThinningOptions& options = {}) {
  ThinningOptions keep = options;
  keep.refresh = BoundRefresh::KeepOriginal;
  return simulate_event_time(std::forward<RateFn>(rate), [&bound](double) { return bound; }, rng, horizon, keep);
}

/// The envelope is the rate itself: a single inversion, no acceptance step.
inline EventOutcome simulate_exact_event_time(const RateBound& rate, RandomStream& rng, double horizon,
                                              SumSampling sampling = SumSampling::ComponentMin) {
  EventOutcome outcome;
  outcome.proposals_used = 1;
  const double t = next_envelope_arrival(rate, 0.0, rng, sampling);
  if (std::isfinite(t) && t <= horizon) outcome.tau = t;
  return outcome;
}

}  // namespace fedpdmc
