#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "fedpdmc/core.hpp"
#include "fedpdmc/potential.hpp"
#include "fedpdmc/random.hpp"
#include "fedpdmc/rates.hpp"

namespace fedpdmc {

/// Negates coordinate `i` (0-based).
inline Vec zigzag_flip(const Vec& v, std::size_t i) {
  detail::require(i < static_cast<std::size_t>(v.size()), ErrorCode::InvalidArgument,
                  "flip index " + std::to_string(i) + " out of range");
  Vec out = v;
  out[static_cast<Eigen::Index>(i)] = -out[static_cast<Eigen::Index>(i)];
  return out;
}

/// R v = v - 2 <v, g> / |Sigma^{1/2} g|^2 * Sigma g. An empty `sigma` means identity.
inline Vec bps_reflect(const Vec& v, const Vec& grad, const Mat& sigma = Mat()) {
  detail::require(v.size() == grad.size(), ErrorCode::DimensionMismatch, "velocity/gradient size mismatch");
  detail::require(grad.squaredNorm() > 0.0, ErrorCode::ZeroGradient, "reflection undefined for zero gradient");
  const Vec sg = sigma.size() == 0 ? grad : Vec(sigma * grad);
  const double denom = grad.dot(sg);
  return v - (2.0 * v.dot(grad) / denom) * sg;
}

/// The stationary velocity law nu.
struct VelocityDistribution {
  enum class Kind { UniformSigns, Gaussian };

  Kind kind = Kind::UniformSigns;
  std::size_t dim = 1;
  Mat chol;  // lower Cholesky factor of Sigma; empty means identity

  static VelocityDistribution uniform_signs(std::size_t d) { return {Kind::UniformSigns, d, {}}; }
  static VelocityDistribution gaussian(std::size_t d) { return {Kind::Gaussian, d, {}}; }
  static VelocityDistribution gaussian(const Mat& sigma) {
    Eigen::LLT<Mat> llt(sigma);
    detail::require(llt.info() == Eigen::Success, ErrorCode::InvalidArgument,
                    "velocity covariance must be positive definite");
    return {Kind::Gaussian, static_cast<std::size_t>(sigma.rows()), llt.matrixL()};
  }
};

inline Vec refresh_velocity(const VelocityDistribution& nu, RandomStream& rng) {
  Vec v(static_cast<Eigen::Index>(nu.dim));
  if (nu.kind == VelocityDistribution::Kind::UniformSigns) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = (rng() >> 63) != 0 ? 1.0 : -1.0;
    return v;
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  if (nu.chol.size() != 0) v = nu.chol * v;
  return v;
}

/// A proposed event: time along the flow from the current state and the
/// velocity to adopt if this proposal wins.
struct Proposal {
  double tau = kNever;
  Vec velocity;

  bool finite() const { return std::isfinite(tau); }
};

/// One competing jump mechanism (lambda_i, Q_i).
class Mechanism {
 public:
  virtual ~Mechanism() = default;
  /// `evaluations` accumulates per-datum partial derivative evaluations.
  virtual Proposal propose(const PhaseState& state, const Flow& flow, RandomStream& rng, double horizon,
                           std::uint64_t& evaluations) const = 0;
};

/// Coordinatewise flips at rates (v_i dU/dx_i)_+; each coordinate is
/// simulated separately and the earliest wins.
class ZigZagMechanism final : public Mechanism {
 public:
  explicit ZigZagMechanism(std::shared_ptr<const PotentialSlice> slice, ThinningOptions options = {})
      : slice_(std::move(slice)), options_(options) {}

  Proposal propose(const PhaseState& state, const Flow& flow, RandomStream& rng, double horizon,
                   std::uint64_t& evaluations) const override {
    detail::require(flow.kind == FlowKind::Linear, ErrorCode::InvalidArgument, "Zig-Zag requires a linear flow");
    auto ray = slice_->ray(state.x, state.v);
    const bool exact = ray->exact();
    double best = kNever;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < slice_->dim(); ++k) {
      const double cutoff = std::min(horizon, best);
      EventOutcome out;
      if (exact) {
        out = simulate_exact_event_time(ray->coordinate_bound(k, 0.0), rng, cutoff);
      } else {
        out = simulate_event_time([&](double t) { return std::max(ray->directional_partial(k, t), 0.0); },
                                  [&](double t) { return ray->coordinate_bound(k, t); }, rng, cutoff, options_);
      }
      if (out.tau < best) {
        best = out.tau;
        best_k = k;
      }
    }
    evaluations += ray->evaluations;
    Proposal p;
    p.tau = best;
    if (std::isfinite(best)) p.velocity = zigzag_flip(state.v, best_k);
    return p;
  }

 private:
  std::shared_ptr<const PotentialSlice> slice_;
  ThinningOptions options_;
};

/// Reflection at rate <v, grad U>_+. On a linear flow the envelope is the
/// Hessian affine bound (exact for Gaussian slices); on the harmonic flow a
/// constant bound from |x(t)|, |v(t)| <= |x| + |v| is used.
class BpsMechanism final : public Mechanism {
 public:
  BpsMechanism(std::shared_ptr<const PotentialSlice> slice, Mat sigma = Mat(), ThinningOptions options = {})
      : slice_(std::move(slice)), sigma_(std::move(sigma)), options_(options) {}

  Proposal propose(const PhaseState& state, const Flow& flow, RandomStream& rng, double horizon,
                   std::uint64_t& evaluations) const override {
    const std::size_t d = slice_->dim();
    const std::uint64_t gradient_cost = d * slice_->data_count();
    EventOutcome out;
    if (flow.kind == FlowKind::Linear) {
      auto ray = slice_->ray(state.x, state.v);
      auto inner = [&](double t) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += ray->directional_partial(k, t);
        return s;
      };
      if (ray->exact()) {
        double slope = 0.0;
        for (std::size_t k = 0; k < d; ++k) slope += ray->slope_bound(k);
        out = simulate_exact_event_time(RateBound::affine(inner(0.0), slope), rng, horizon);
      } else {
        const double hess = slice_->hessian_norm_bound();
        out = simulate_event_time([&](double t) { return std::max(inner(t), 0.0); },
                                  [&](double t) {
                                    return affine_bound_from_hessian(std::max(inner(t), 0.0), hess, state.v);
                                  },
                                  rng, horizon, options_);
      }
      evaluations += ray->evaluations;
    } else {
      const double radius = state.x.norm() + state.v.norm();
      const double g0 = slice_->gradient(Vec::Zero(state.x.size())).norm();
      const RateBound bound = RateBound::constant(radius * (g0 + slice_->hessian_norm_bound() * radius));
      evaluations += gradient_cost;
      out = simulate_event_time(
          [&](double t) {
            const PhaseState s = flow_evaluate(flow, state, t);
            evaluations += gradient_cost;
            return std::max(s.v.dot(slice_->gradient(s.x)), 0.0);
          },
          bound, rng, horizon, options_);
    }
    Proposal p;
    p.tau = out.tau;
    if (out.finite()) {
      const PhaseState at = flow_evaluate(flow, state, out.tau);
      evaluations += gradient_cost;
      p.velocity = bps_reflect(at.v, slice_->gradient(at.x), sigma_);
    }
    return p;
  }

 private:
  std::shared_ptr<const PotentialSlice> slice_;
  Mat sigma_;
  ThinningOptions options_;
};

/// Velocity refreshment at constant rate rho (also the privacy noise floor).
class RefreshMechanism final : public Mechanism {
 public:
  RefreshMechanism(double rate, VelocityDistribution nu) : rate_(rate), nu_(std::move(nu)) {
    detail::require(rate >= 0.0, ErrorCode::InvalidArgument, "refresh rate must be nonnegative");
  }

  Proposal propose(const PhaseState&, const Flow&, RandomStream& rng, double horizon,
                   std::uint64_t&) const override {
    Proposal p;
    if (rate_ <= 0.0) return p;
    const double tau = rng.exponential() / rate_;
    if (tau <= horizon) {
      p.tau = tau;
      p.velocity = refresh_velocity(nu_, rng);
    }
    return p;
  }

  double rate() const { return rate_; }

 private:
  double rate_;
  VelocityDistribution nu_;
};

/// Earliest proposal among competing mechanisms; later mechanisms are only
/// simulated up to the current best time.
inline Proposal propose_first(std::span<const std::shared_ptr<const Mechanism>> mechanisms, const PhaseState& state,
                              const Flow& flow, RandomStream& rng, double horizon, std::uint64_t& evaluations) {
  Proposal best;
  for (const auto& mechanism : mechanisms) {
    const double cutoff = std::min(horizon, best.tau);
    Proposal p = mechanism->propose(state, flow, rng, cutoff, evaluations);
    if (p.tau < best.tau) best = std::move(p);
  }
  return best;
}

using MechanismList = std::vector<std::shared_ptr<const Mechanism>>;

struct PdmcOptions {
  /// Proposals beyond this many time units from the current state count as "never".
  double proposal_horizon = 1e6;
};

struct PdmcRun {
  Skeleton skeleton;
  std::uint64_t evaluations = 0;
};

/// Single-machine PDMC: repeatedly simulate the first event of the competing
/// mechanisms, move along the flow, and adopt the winning velocity.
inline PdmcRun run_pdmc(const Flow& flow, const MechanismList& mechanisms, const PhaseState& init, double horizon,
                        RandomStream& rng, const PdmcOptions& options = {}) {
  detail::require(horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  detail::require(init.x.size() == init.v.size() && init.x.size() > 0, ErrorCode::DimensionMismatch,
                  "initial state dimensions");
  PdmcRun run;
  run.skeleton.flow = flow;
  run.skeleton.horizon = horizon;
  PhaseState state{init.x, init.v, 0.0};
  run.skeleton.points.push_back({0.0, state.x, state.v});
  for (;;) {
    // nothing past the horizon is ever used
    const double cutoff = std::min(options.proposal_horizon, horizon - state.t);
    Proposal p = propose_first(mechanisms, state, flow, rng, cutoff, run.evaluations);
    if (!p.finite() || state.t + p.tau > horizon) break;
    state = flow_evaluate(flow, state, p.tau);
    state.v = std::move(p.velocity);
    run.skeleton.points.push_back({state.t, state.x, state.v});
  }
  return run;
}

}  // namespace fedpdmc
