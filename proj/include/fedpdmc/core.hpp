#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "fedpdmc/error.hpp"

namespace fedpdmc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Position, velocity and process time of a PDMP.
struct PhaseState {
  Vec x;
  Vec v;
  double t = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(x.size()); }
};

enum class FlowKind { Linear, Harmonic };

/// Deterministic dynamics between events. Linear: dx/dt = v, dv/dt = 0.
/// Harmonic: dx/dt = v, dv/dt = -x, preserving N(0, Sigma) x N(0, Sigma);
/// `sigma_inv` is only used for the energy functional.
struct Flow {
  FlowKind kind = FlowKind::Linear;
  Mat sigma_inv;

  static Flow linear() { return {}; }
  static Flow harmonic(Mat sigma_inv) { return {FlowKind::Harmonic, std::move(sigma_inv)}; }

  /// x'Sigma^{-1}x + v'Sigma^{-1}v; identity Sigma when `sigma_inv` is empty.
  double energy(const PhaseState& s) const {
    if (sigma_inv.size() == 0) return s.x.squaredNorm() + s.v.squaredNorm();
    return s.x.dot(sigma_inv * s.x) + s.v.dot(sigma_inv * s.v);
  }
};

inline PhaseState flow_evaluate(const Flow& flow, const PhaseState& state, double dt) {
  detail::require(state.x.size() == state.v.size(), ErrorCode::DimensionMismatch,
                  "position and velocity dimensions differ");
  detail::require(dt >= 0.0, ErrorCode::InvalidArgument, "flow time must be nonnegative");
  PhaseState out;
  out.t = state.t + dt;
  if (dt == 0.0) {
    out.x = state.x;
    out.v = state.v;
    return out;
  }
  switch (flow.kind) {
    case FlowKind::Linear:
      out.x = state.x + dt * state.v;
      out.v = state.v;
      break;
    case FlowKind::Harmonic: {
      const double c = std::cos(dt);
      const double s = std::sin(dt);
      out.x = c * state.x + s * state.v;
      out.v = c * state.v - s * state.x;
      break;
    }
  }
  return out;
}

/// One skeleton point; the velocity is the one taken right after the event.
struct SkeletonPoint {
  double t = 0.0;
  Vec x;
  Vec v;
};

struct Skeleton {
  std::vector<SkeletonPoint> points;
  Flow flow;
  double horizon = 0.0;

  std::size_t dim() const { return points.empty() ? 0 : static_cast<std::size_t>(points.front().x.size()); }
  std::size_t event_count() const { return points.empty() ? 0 : points.size() - 1; }

  PhaseState state_at(std::size_t k) const { return {points[k].x, points[k].v, points[k].t}; }

  void validate() const {
    detail::require(!points.empty(), ErrorCode::EmptyInput, "skeleton has no points");
    detail::require(points.front().t == 0.0, ErrorCode::InvalidArgument, "first skeleton time must be 0");
    const auto d = points.front().x.size();
    detail::require(d >= 1, ErrorCode::DimensionMismatch, "skeleton dimension must be >= 1");
    for (std::size_t k = 0; k < points.size(); ++k) {
      detail::require(points[k].x.size() == d && points[k].v.size() == d, ErrorCode::DimensionMismatch,
                      "skeleton point " + std::to_string(k) + " has inconsistent dimension");
      if (k > 0)
        detail::require(points[k].t > points[k - 1].t, ErrorCode::InvalidArgument,
                        "skeleton times must be strictly increasing");
    }
    detail::require(points.back().t <= horizon, ErrorCode::InvalidArgument, "skeleton extends past horizon");
  }
};

/// h(x) = constant + linear'x + x'quadratic x. Integrated in closed form
/// along linear segments.
struct QuadraticFunctional {
  double constant = 0.0;
  Vec linear;
  Mat quadratic;

  static QuadraticFunctional one() { return {1.0, {}, {}}; }
  static QuadraticFunctional coordinate(std::size_t d, std::size_t k) {
    QuadraticFunctional h;
    h.linear = Vec::Zero(static_cast<Eigen::Index>(d));
    h.linear[static_cast<Eigen::Index>(k)] = 1.0;
    return h;
  }
  static QuadraticFunctional coordinate_square(std::size_t d, std::size_t k) {
    QuadraticFunctional h;
    h.quadratic = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    h.quadratic(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = 1.0;
    return h;
  }

  double operator()(const Vec& x) const {
    double value = constant;
    if (linear.size() > 0) value += linear.dot(x);
    if (quadratic.size() > 0) value += x.dot(quadratic * x);
    return value;
  }
};

namespace detail {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                                   0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665,
                                                     0.5688888888888889, 0.4786286704993665,
                                                     0.2369268850561891};

template <class Fn>
void for_each_segment(const Skeleton& skeleton, Fn&& fn) {
  const auto& pts = skeleton.points;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double end = (k + 1 < pts.size()) ? pts[k + 1].t : skeleton.horizon;
    const double length = end - pts[k].t;
    if (length > 0.0) fn(pts[k], length);
  }
}

}  // namespace detail

/// Time average (1/T) * integral of h(X(s)) over [0, T], one 5-point
/// Gauss-Legendre rule per segment.
inline double trajectory_integrate(const Skeleton& skeleton, const std::function<double(const Vec&)>& h) {
  detail::require(!skeleton.points.empty(), ErrorCode::EmptyInput, "skeleton has no points");
  detail::require(skeleton.horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  double total = 0.0;
  double elapsed = 0.0;
  detail::for_each_segment(skeleton, [&](const SkeletonPoint& p, double length) {
    const PhaseState start{p.x, p.v, p.t};
    for (std::size_t i = 0; i < detail::kGaussNodes.size(); ++i) {
      const double s = 0.5 * length * (detail::kGaussNodes[i] + 1.0);
      const double w = 0.5 * length * detail::kGaussWeights[i];
      total += w * h(flow_evaluate(skeleton.flow, start, s).x);
      elapsed += w;
    }
  });
  return total / elapsed;
}

/// Closed form on linear flows; falls back to quadrature for harmonic flows.
inline double trajectory_integrate(const Skeleton& skeleton, const QuadraticFunctional& h) {
  if (skeleton.flow.kind != FlowKind::Linear)
    return trajectory_integrate(skeleton, std::function<double(const Vec&)>(std::cref(h)));
  detail::require(!skeleton.points.empty(), ErrorCode::EmptyInput, "skeleton has no points");
  detail::require(skeleton.horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  double total = 0.0;
  double elapsed = 0.0;
  detail::for_each_segment(skeleton, [&](const SkeletonPoint& p, double length) {
    // h(x + s v) = h0 + h1 s + h2 s^2
    double h0 = h.constant;
    double h1 = 0.0;
    double h2 = 0.0;
    if (h.linear.size() > 0) {
      h0 += h.linear.dot(p.x);
      h1 += h.linear.dot(p.v);
    }
    if (h.quadratic.size() > 0) {
      const Vec qv = h.quadratic * p.v;
      h0 += p.x.dot(h.quadratic * p.x);
      h1 += p.x.dot(qv) + p.v.dot(h.quadratic * p.x);
      h2 += p.v.dot(qv);
    }
    total += h0 * length + h1 * length * length / 2.0 + h2 * length * length * length / 3.0;
    elapsed += length;
  });
  return total / elapsed;
}

/// States at times 0, delta, 2*delta, ... <= horizon.
inline std::vector<PhaseState> trajectory_discretize(const Skeleton& skeleton, double delta) {
  detail::require(delta > 0.0, ErrorCode::InvalidArgument, "delta must be positive");
  detail::require(!skeleton.points.empty(), ErrorCode::EmptyInput, "skeleton has no points");
  std::vector<PhaseState> out;
  std::size_t seg = 0;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * delta;
    if (t > skeleton.horizon) break;
    while (seg + 1 < skeleton.points.size() && skeleton.points[seg + 1].t <= t) ++seg;
    const auto& p = skeleton.points[seg];
    out.push_back(flow_evaluate(skeleton.flow, {p.x, p.v, p.t}, t - p.t));
  }
  return out;
}

/// Positions only, as an n x d matrix, for samples at times >= `burn_in`.
inline Mat discretized_positions(const Skeleton& skeleton, double delta, double burn_in = 0.0) {
  detail::require(delta > 0.0, ErrorCode::InvalidArgument, "delta must be positive");
  detail::require(!skeleton.points.empty(), ErrorCode::EmptyInput, "skeleton has no points");
  const auto first = static_cast<std::size_t>(std::ceil(burn_in / delta));
  const auto last = static_cast<std::size_t>(std::floor(skeleton.horizon / delta));
  const std::size_t n = last >= first ? last - first + 1 : 0;
  Mat out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(skeleton.dim()));
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(first + i) * delta;
    while (seg + 1 < skeleton.points.size() && skeleton.points[seg + 1].t <= t) ++seg;
    const auto& p = skeleton.points[seg];
    out.row(static_cast<Eigen::Index>(i)) = flow_evaluate(skeleton.flow, {p.x, p.v, p.t}, t - p.t).x.transpose();
  }
  return out;
}

}  // namespace fedpdmc
