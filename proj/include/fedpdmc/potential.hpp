#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "fedpdmc/core.hpp"
#include "fedpdmc/rates.hpp"

namespace fedpdmc {

/// A potential restricted to the line x + t v. Rays are created per event
/// round so implementations may cache along the line.
class Ray {
 public:
  virtual ~Ray() = default;

  /// v_k * dU/dx_k at x + t v.
  virtual double directional_partial(std::size_t k, double t) = 0;

  /// Upper bound on d/ds [v_k dU/dx_k(x + s v)] over all s.
  virtual double slope_bound(std::size_t k) const = 0;

  /// Envelope for s -> (v_k dU/dx_k(x + (t + s) v))_+.
  virtual RateBound coordinate_bound(std::size_t k, double t) {
    return RateBound::affine(directional_partial(k, t), slope_bound(k));
  }

  /// True when directional_partial is exactly affine in t with slope slope_bound(k),
  /// in which case coordinate_bound is the rate itself.
  virtual bool exact() const { return false; }

  /// Per-datum partial derivative evaluations performed through this ray.
  std::uint64_t evaluations = 0;
};

/// One additive piece U_m of a potential; data stay inside the slice.
class PotentialSlice {
 public:
  virtual ~PotentialSlice() = default;

  virtual std::size_t dim() const = 0;
  /// Data items touched by one partial derivative.
  virtual std::size_t data_count() const = 0;
  virtual double potential(const Vec& x) const = 0;
  virtual double partial(const Vec& x, std::size_t k) const = 0;
  virtual Vec gradient(const Vec& x) const {
    Vec g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) g[k] = partial(x, static_cast<std::size_t>(k));
    return g;
  }
  /// Uniform bound on the spectral norm of the Hessian.
  virtual double hessian_norm_bound() const = 0;
  virtual std::unique_ptr<Ray> ray(const Vec& x, const Vec& v) const = 0;
};

/// sum_j w_j U_j with nonnegative, mutable weights (prior shares).
class WeightedSumSlice final : public PotentialSlice {
 public:
  struct Term {
    std::shared_ptr<const PotentialSlice> slice;
    double weight = 1.0;
  };

  explicit WeightedSumSlice(std::vector<Term> terms) : terms_(std::move(terms)) {
    detail::require(!terms_.empty(), ErrorCode::InvalidArgument, "weighted sum needs at least one term");
    for (const auto& term : terms_) {
      detail::require(term.slice != nullptr, ErrorCode::InvalidArgument, "null slice");
      detail::require(term.slice->dim() == terms_.front().slice->dim(), ErrorCode::DimensionMismatch,
                      "slices disagree on dimension");
      detail::require(term.weight >= 0.0, ErrorCode::InvalidArgument, "weights must be nonnegative");
    }
  }

  void set_weight(std::size_t term, double weight) {
    detail::require(weight >= 0.0, ErrorCode::InvalidArgument, "weights must be nonnegative");
    terms_.at(term).weight = weight;
  }
  double weight(std::size_t term) const { return terms_.at(term).weight; }
  std::size_t term_count() const { return terms_.size(); }
  const PotentialSlice& term(std::size_t i) const { return *terms_.at(i).slice; }

  std::size_t dim() const override { return terms_.front().slice->dim(); }
  std::size_t data_count() const override {
    std::size_t n = 0;
    for (const auto& term : terms_) n += term.slice->data_count();
    return n;
  }
  double potential(const Vec& x) const override {
    double u = 0.0;
    for (const auto& term : terms_)
      if (term.weight != 0.0) u += term.weight * term.slice->potential(x);
    return u;
  }
  double partial(const Vec& x, std::size_t k) const override {
    double g = 0.0;
    for (const auto& term : terms_)
      if (term.weight != 0.0) g += term.weight * term.slice->partial(x, k);
    return g;
  }
  Vec gradient(const Vec& x) const override {
    Vec g = Vec::Zero(x.size());
    for (const auto& term : terms_)
      if (term.weight != 0.0) g += term.weight * term.slice->gradient(x);
    return g;
  }
  double hessian_norm_bound() const override {
    double h = 0.0;
    for (const auto& term : terms_) h += term.weight * term.slice->hessian_norm_bound();
    return h;
  }

  std::unique_ptr<Ray> ray(const Vec& x, const Vec& v) const override {
    auto out = std::make_unique<SumRay>();
    for (const auto& term : terms_) {
      if (term.weight == 0.0) continue;
      out->parts.push_back({term.slice->ray(x, v), term.weight});
    }
    out->sync();
    return out;
  }

 private:
  struct SumRay final : Ray {
    struct Part {
      std::unique_ptr<Ray> ray;
      double weight;
    };
    std::vector<Part> parts;

    double directional_partial(std::size_t k, double t) override {
      double value = 0.0;
      for (auto& p : parts) value += p.weight * p.ray->directional_partial(k, t);
      sync();
      return value;
    }
    double slope_bound(std::size_t k) const override {
      double slope = 0.0;
      for (const auto& p : parts) slope += p.weight * p.ray->slope_bound(k);
      return slope;
    }
    bool exact() const override {
      for (const auto& p : parts)
        if (!p.ray->exact()) return false;
      return true;
    }
    void sync() {
      evaluations = 0;
      for (const auto& p : parts) evaluations += p.ray->evaluations;
    }
  };

  std::vector<Term> terms_;
};

}  // namespace fedpdmc
