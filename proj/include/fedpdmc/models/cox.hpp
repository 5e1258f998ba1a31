#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fedpdmc/core.hpp"
#include "fedpdmc/models/gaussian.hpp"
#include "fedpdmc/potential.hpp"
#include "fedpdmc/random.hpp"
#include "fedpdmc/rates.hpp"
#include "fedpdmc/samplers.hpp"

namespace fedpdmc {

/// 4-neighbour adjacency of a side x side lattice, nodes flattened row-major.
inline Mat lattice_adjacency(std::size_t side) {
  const auto n = static_cast<Eigen::Index>(side * side);
  Mat a = Mat::Zero(n, n);
  const auto g = static_cast<Eigen::Index>(side);
  for (Eigen::Index i = 0; i < g; ++i)
    for (Eigen::Index j = 0; j < g; ++j) {
      const Eigen::Index u = i * g + j;
      if (i + 1 < g) a(u, u + g) = a(u + g, u) = 1.0;
      if (j + 1 < g) a(u, u + 1) = a(u + 1, u) = 1.0;
    }
  return a;
}

/// beta (I - alpha A); throws if not positive definite.
inline Mat cox_prior_precision(std::size_t side, double alpha, double beta) {
  detail::require(side >= 1, ErrorCode::InvalidArgument, "grid side must be >= 1");
  const Mat a = lattice_adjacency(side);
  const Mat p = beta * (Mat::Identity(a.rows(), a.cols()) - alpha * a);
  Eigen::SelfAdjointEigenSolver<Mat> eig(p, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  detail::require(smallest > 0.0, ErrorCode::ConfigInvalid,
                  "prior precision beta(I - alpha A) is not positive definite: smallest eigenvalue " +
                      std::to_string(smallest) + " for alpha=" + std::to_string(alpha) +
                      ", beta=" + std::to_string(beta) + " on a " + std::to_string(side) + "x" +
                      std::to_string(side) + " grid");
  return p;
}

/// Worker node sets: square blocks when M = r^2 and r divides the side,
/// otherwise contiguous row-major chunks.
inline std::vector<std::vector<std::size_t>> spatial_partition(std::size_t side, std::size_t workers) {
  detail::require(workers >= 1, ErrorCode::InvalidArgument, "M must be >= 1");
  detail::require(workers <= side * side, ErrorCode::InvalidArgument, "more workers than grid nodes");
  std::vector<std::vector<std::size_t>> parts(workers);
  const auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(workers))));
  if (r * r == workers && side % r == 0) {
    const std::size_t block = side / r;
    for (std::size_t i = 0; i < side; ++i)
      for (std::size_t j = 0; j < side; ++j) parts[(i / block) * r + j / block].push_back(i * side + j);
    return parts;
  }
  const auto sizes = split_evenly(side * side, workers);
  std::size_t node = 0;
  for (std::size_t m = 0; m < workers; ++m)
    for (std::size_t c = 0; c < sizes[m]; ++c) parts[m].push_back(node++);
  return parts;
}

/// Poisson counts y_k ~ Poisson(exp(x_k)) on the nodes a worker owns:
/// U_m(x) = sum_{k in V_m} exp(x_k) - y_k x_k.
class CoxLikelihoodSlice final : public PotentialSlice {
 public:
  CoxLikelihoodSlice(Vec counts, std::vector<std::size_t> owned) : counts_(std::move(counts)), owned_(std::move(owned)) {
    owns_.assign(static_cast<std::size_t>(counts_.size()), false);
    for (auto k : owned_) {
      detail::require(k < owns_.size(), ErrorCode::InvalidArgument, "owned node out of range");
      detail::require(!owns_[k], ErrorCode::InvalidArgument, "node listed twice");
      owns_[k] = true;
    }
  }

  bool owns(std::size_t k) const { return k < owns_.size() && owns_[k]; }
  const std::vector<std::size_t>& owned() const { return owned_; }
  double count(std::size_t k) const { return counts_[static_cast<Eigen::Index>(k)]; }

  std::size_t dim() const override { return static_cast<std::size_t>(counts_.size()); }
  std::size_t data_count() const override { return 1; }

  double potential(const Vec& x) const override {
    double u = 0.0;
    for (auto k : owned_) {
      const auto i = static_cast<Eigen::Index>(k);
      u += std::exp(x[i]) - counts_[i] * x[i];
    }
    return u;
  }
  double partial(const Vec& x, std::size_t k) const override {
    if (!owns(k)) return 0.0;
    const auto i = static_cast<Eigen::Index>(k);
    return std::exp(x[i]) - counts_[i];
  }
  double hessian_norm_bound() const override { return kNever; }

  std::unique_ptr<Ray> ray(const Vec& x, const Vec& v) const override {
    auto out = std::make_unique<CoxRay>(*this);
    out->x = x;
    out->v = v;
    return out;
  }

 private:
  struct CoxRay final : Ray {
    explicit CoxRay(const CoxLikelihoodSlice& s) : slice(s) {}
    const CoxLikelihoodSlice& slice;
    Vec x, v;

    double directional_partial(std::size_t k, double t) override {
      if (!slice.owns(k)) return 0.0;
      ++evaluations;
      const auto i = static_cast<Eigen::Index>(k);
      return v[i] * (std::exp(x[i] + t * v[i]) - slice.counts_[i]);
    }
    double slope_bound(std::size_t) const override { return kNever; }
    /// (-y_k v_k)_+ + (v_k exp(x_k + v_k s))_+
    RateBound coordinate_bound(std::size_t k, double t) override {
      if (!slice.owns(k)) return RateBound::constant(0.0);
      const auto i = static_cast<Eigen::Index>(k);
      return RateBound::sum({RateBound::constant(-slice.counts_[i] * v[i]),
                             RateBound::exp_linear(v[i], x[i] + t * v[i], v[i])});
    }
  };

  Vec counts_;
  std::vector<std::size_t> owned_;
  std::vector<bool> owns_;
};

inline double cox_partial(const CoxLikelihoodSlice& slice, const Vec& x, std::size_t k) {
  if (!slice.owns(k)) throw Error(ErrorCode::NodeNotOwned, "node " + std::to_string(k) + " is not owned by this worker");
  return slice.partial(x, k);
}

struct CoxEvent : EventOutcome {
  std::size_t node = 0;  // coordinate to flip
};

/// Zig-Zag event for a Cox worker by the coordinatewise recipe: per owned
/// node draw from the constant envelope (-y_k v_k)_+ and from the exponential
/// envelope (v_k e^{x_k + s})_+, take the earliest, thin, and repeat from the
/// advanced state on rejection. Requires |v_k| = 1.
inline CoxEvent cox_propose_event(const CoxLikelihoodSlice& slice, const PhaseState& state, RandomStream& rng,
                                      double horizon, std::uint64_t* evaluations = nullptr,
                                      double accept_tolerance = 1e-9) {
  Vec x = state.x;
  const Vec& v = state.v;
  double elapsed = 0.0;
  CoxEvent outcome;
  for (;;) {
    double best = kNever;
    std::size_t chosen = 0;
    for (auto k : slice.owned()) {
      const auto i = static_cast<Eigen::Index>(k);
      const double y = slice.count(k);
      double tau = kNever;
      if (y * v[i] < 0.0) tau = std::log(rng.uniform()) / (y * v[i]);
      if (v[i] > 0.0) tau = std::min(tau, std::log(std::exp(x[i]) - std::log(rng.uniform())) - x[i]);
      if (tau < best) {
        best = tau;
        chosen = k;
      }
    }
    ++outcome.proposals_used;
    if (!std::isfinite(best) || elapsed + best > horizon) return outcome;
    elapsed += best;
    x += best * v;
    const auto l = static_cast<Eigen::Index>(chosen);
    const double t1 = -slice.count(chosen) * v[l];
    const double t2 = v[l] * std::exp(x[l]);
    if (evaluations != nullptr) ++*evaluations;
    const double ratio = std::max(0.0, t1 + t2) / (std::max(0.0, t1) + std::max(0.0, t2));
    if (ratio > 1.0 + accept_tolerance) throw AcceptRatioExceeded(ratio);
    if (rng.uniform() < ratio) {
      outcome.tau = elapsed;
      outcome.node = chosen;
      return outcome;
    }
  }
}

class CoxRecipeMechanism final : public Mechanism {
 public:
  explicit CoxRecipeMechanism(std::shared_ptr<const CoxLikelihoodSlice> slice) : slice_(std::move(slice)) {}

  Proposal propose(const PhaseState& state, const Flow& flow, RandomStream& rng, double horizon,
                   std::uint64_t& evaluations) const override {
    detail::require(flow.kind == FlowKind::Linear, ErrorCode::InvalidArgument, "Zig-Zag requires a linear flow");
    const CoxEvent out = cox_propose_event(*slice_, state, rng, horizon, &evaluations);
    Proposal p;
    if (out.finite()) {
      p.tau = out.tau;
      p.velocity = zigzag_flip(state.v, out.node);
    }
    return p;
  }

 private:
  std::shared_ptr<const CoxLikelihoodSlice> slice_;
};

/// Log-Gaussian Cox process on a side x side lattice with prior
/// N(0, (beta (I - alpha A))^{-1}) held as a separate slice.
class CoxModel {
 public:
  CoxModel(std::size_t side, Vec counts, double alpha, double beta, std::vector<std::vector<std::size_t>> partition)
      : side_(side), counts_(std::move(counts)), alpha_(alpha), beta_(beta), partition_(std::move(partition)) {
    detail::require(counts_.size() == static_cast<Eigen::Index>(side * side), ErrorCode::DimensionMismatch,
                    "one count per grid node");
    for (Eigen::Index k = 0; k < counts_.size(); ++k)
      detail::require(counts_[k] >= 0.0 && counts_[k] == std::floor(counts_[k]), ErrorCode::InvalidArgument,
                      "counts must be nonnegative integers");
    std::vector<int> seen(side * side, 0);
    for (const auto& part : partition_)
      for (auto k : part) {
        detail::require(k < seen.size(), ErrorCode::InvalidArgument, "partition node out of range");
        ++seen[k];
      }
    for (int s : seen) detail::require(s == 1, ErrorCode::InvalidArgument, "partition must cover every node exactly once");
    precision_ = cox_prior_precision(side, alpha, beta);
    prior_ = std::make_shared<GaussianSlice>(Vec::Zero(counts_.size()), precision_, 0);
    for (const auto& part : partition_) slices_.push_back(std::make_shared<CoxLikelihoodSlice>(counts_, part));
  }

  std::size_t side() const { return side_; }
  std::size_t dim() const { return side_ * side_; }
  std::size_t workers() const { return slices_.size(); }
  const Vec& counts() const { return counts_; }
  const Mat& precision() const { return precision_; }
  std::shared_ptr<const CoxLikelihoodSlice> likelihood(std::size_t m) const { return slices_.at(m); }
  std::shared_ptr<const GaussianSlice> prior() const { return prior_; }

  double potential(const Vec& x) const {
    double u = prior_->potential(x);
    for (const auto& s : slices_) u += s->potential(x);
    return u;
  }
  Vec gradient(const Vec& x) const {
    Vec g = prior_->gradient(x);
    for (const auto& s : slices_) g += s->gradient(x);
    return g;
  }

 private:
  std::size_t side_;
  Vec counts_;
  double alpha_;
  double beta_;
  std::vector<std::vector<std::size_t>> partition_;
  Mat precision_;
  std::shared_ptr<GaussianSlice> prior_;
  std::vector<std::shared_ptr<CoxLikelihoodSlice>> slices_;
};

}  // namespace fedpdmc
