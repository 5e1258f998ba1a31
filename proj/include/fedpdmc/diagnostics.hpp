#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include "fedpdmc/core.hpp"
#include "fedpdmc/federated.hpp"
#include "fedpdmc/random.hpp"

namespace fedpdmc {

/// Velocity events per unit process time.
inline double effective_switching_rate(const Skeleton& skeleton) {
  detail::require(skeleton.horizon > 0.0, ErrorCode::InvalidArgument, "horizon must be positive");
  return static_cast<double>(skeleton.event_count()) / skeleton.horizon;
}

/// Sample autocorrelations rho_0..rho_{n-1} via zero-padded FFT.
inline std::vector<double> autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::size_t size = 1;
  while (size < 2 * n) size <<= 1;
  std::vector<double> padded(size, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = x[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::norm(f);
  std::vector<double> acov;
  fft.inv(acov, freq);
  std::vector<double> rho(n, 0.0);
  if (acov[0] <= 0.0) return rho;
  for (std::size_t k = 0; k < n; ++k) rho[k] = acov[k] / acov[0];
  return rho;
}

struct EssResult {
  double value = 0.0;
  bool constant = false;    // zero variance; value is 0
  bool antithetic = false;  // value exceeds twice the sample count
};

/// n / tau with tau from Geyer's initial positive (and monotone) sequence of
/// pair sums rho_{2m} + rho_{2m+1}; tau is floored at 1/log10(n).
inline EssResult ess(std::span<const double> x) {
  const std::size_t n = x.size();
  detail::require(n >= 10, ErrorCode::InvalidArgument, "ESS needs at least 10 samples");
  EssResult out;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) {
    out.constant = true;
    return out;
  }
  const auto rho = autocorrelation(x);
  double sum = 0.0;
  double previous = kNever;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = rho[2 * m] + rho[2 * m + 1];
    if (m > 0 && pair <= 0.0) break;
    pair = std::min(pair, previous);
    sum += pair;
    previous = pair;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / std::log10(static_cast<double>(n)));
  out.value = static_cast<double>(n) / tau;
  out.antithetic = out.value > 2.0 * static_cast<double>(n);
  return out;
}

inline double ess_value(const Mat& samples, Eigen::Index column) {
  const Vec col = samples.col(column);
  return ess(std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))).value;
}

/// W1 between two empirical measures: the L1 distance between their quantile
/// functions, integrated exactly over the merged breakpoints.
inline double wasserstein1_marginal(std::span<const double> a, std::span<const double> b) {
  detail::require(!a.empty() && !b.empty(), ErrorCode::EmptyInput, "W1 needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < sa.size() && j < sb.size()) {
    // next breakpoints (i+1)/na and (j+1)/nb compared without rounding
    const double ra = static_cast<double>(i + 1) * nb;
    const double rb = static_cast<double>(j + 1) * na;
    const double next = ra <= rb ? static_cast<double>(i + 1) / na : static_cast<double>(j + 1) / nb;
    total += (next - u) * std::abs(sa[i] - sb[j]);
    u = next;
    if (ra <= rb) ++i;
    if (rb <= ra) ++j;
  }
  return total;
}

inline double wasserstein1_marginal(const Mat& a, const Mat& b, Eigen::Index column) {
  const Vec ca = a.col(column), cb = b.col(column);
  return wasserstein1_marginal(std::span<const double>(ca.data(), static_cast<std::size_t>(ca.size())),
                               std::span<const double>(cb.data(), static_cast<std::size_t>(cb.size())));
}

/// P(K > lambda) for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic p-value with the small-sample correction sqrt(n) + 0.12 + 0.11/sqrt(n).
inline double ks_p_value(double statistic, double effective_n) {
  const double s = std::sqrt(effective_n);
  return kolmogorov_survival((s + 0.12 + 0.11 / s) * statistic);
}

inline KsResult ks_one_sample(std::span<const double> x, const std::function<double(double)>& cdf) {
  detail::require(!x.empty(), ErrorCode::EmptyInput, "KS needs samples");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_p_value(d, n)};
}

inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  detail::require(!a.empty() && !b.empty(), ErrorCode::EmptyInput, "KS needs samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

struct MetropolisOptions {
  std::size_t warmup = 20000;
  std::size_t thin = 1;
  double target_acceptance = 0.234;
};

struct MetropolisResult {
  Mat samples;
  double acceptance = 0.0;
  double scale = 0.0;
  std::size_t thin = 1;
};

/// Random-walk Metropolis targeting exp(-U). Warm-up adapts a global scale
/// toward the target acceptance and then a proposal covariance from the
/// warm-up draws. If the chain's ESS falls below n/100 in any coordinate the
/// thinning is doubled and the chain extended.
inline MetropolisResult reference_mh_sample(const std::function<double(const Vec&)>& potential, const Vec& start,
                                            std::size_t n, RandomStream& rng, MetropolisOptions options = {}) {
  detail::require(n >= 10, ErrorCode::InvalidArgument, "reference sample needs n >= 10");
  const auto d = start.size();
  Vec x = start;
  double u = potential(x);
  detail::require(std::isfinite(u), ErrorCode::InvalidArgument, "potential is not finite at the start point");
  Mat chol = Mat::Identity(d, d);
  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)) * 0.1);

  auto step = [&](double scale) {
    Vec z(d);
    for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal();
    const Vec y = x + scale * (chol * z);
    const double uy = potential(y);
    if (std::isfinite(uy) && std::log(rng.uniform()) < u - uy) {
      x = y;
      u = uy;
      return true;
    }
    return false;
  };

  // Two adaptation phases: scale only, then covariance plus scale.
  const std::size_t phase = std::max<std::size_t>(options.warmup / 2, 100);
  for (int stage = 0; stage < 2; ++stage) {
    Mat draws(static_cast<Eigen::Index>(phase), d);
    for (std::size_t i = 0; i < phase; ++i) {
      const bool accepted = step(std::exp(log_scale));
      const double gain = 1.0 / std::pow(static_cast<double>(i + 1), 0.6);
      log_scale += gain * ((accepted ? 1.0 : 0.0) - options.target_acceptance);
      draws.row(static_cast<Eigen::Index>(i)) = x.transpose();
    }
    if (stage == 0) {
      const Mat tail = draws.bottomRows(static_cast<Eigen::Index>(phase / 2));
      const Mat centered = tail.rowwise() - tail.colwise().mean();
      Mat cov = centered.transpose() * centered / static_cast<double>(tail.rows() - 1);
      cov += 1e-10 * Mat::Identity(d, d) * std::max(cov.diagonal().maxCoeff(), 1e-300);
      Eigen::LLT<Mat> llt(cov);
      if (llt.info() == Eigen::Success && cov.diagonal().minCoeff() > 0.0) {
        chol = llt.matrixL();
        log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
      }
    }
  }

  MetropolisResult result;
  result.scale = std::exp(log_scale);
  result.thin = std::max<std::size_t>(options.thin, 1);
  for (int attempt = 0; attempt < 8; ++attempt) {
    result.samples.resize(static_cast<Eigen::Index>(n), d);
    std::size_t accepted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < result.thin; ++t) accepted += step(result.scale) ? 1 : 0;
      result.samples.row(static_cast<Eigen::Index>(i)) = x.transpose();
    }
    result.acceptance = static_cast<double>(accepted) / static_cast<double>(n * result.thin);
    if (result.acceptance < 0.1 || result.acceptance > 0.5)
      throw Error(ErrorCode::AdaptationFailed,
                  "random-walk acceptance " + std::to_string(result.acceptance) + " outside [0.1, 0.5]");
    bool enough = true;
    for (Eigen::Index k = 0; k < d; ++k) enough = enough && ess_value(result.samples, k) >= static_cast<double>(n) / 100.0;
    if (enough) return result;
    result.thin *= 2;
  }
  throw Error(ErrorCode::AdaptationFailed, "reference chain ESS stayed below n/100");
}

/// Summary statistics of one run, serialized with exactly these field names.
struct DiagnosticsReport {
  double event_rate = 0.0;
  std::vector<double> ess_per_coordinate;
  std::vector<double> ess_per_gradient_eval_sequential;
  std::vector<double> ess_per_gradient_eval_parallel;
  std::vector<double> w1_per_coordinate;
  GradientCounts gradient_evals_total;
  nlohmann::json wall_metadata = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"event_rate", event_rate},
            {"ess_per_coordinate", ess_per_coordinate},
            {"ess_per_gradient_eval",
             {{"sequential", ess_per_gradient_eval_sequential}, {"parallel", ess_per_gradient_eval_parallel}}},
            {"w1_per_coordinate", w1_per_coordinate},
            {"gradient_evals_total",
             {{"sequential", gradient_evals_total.sequential}, {"parallel", gradient_evals_total.parallel}}},
            {"wall_metadata", wall_metadata}};
  }

  static DiagnosticsReport from_json(const nlohmann::json& j) {
    DiagnosticsReport r;
    try {
      r.event_rate = j.at("event_rate").get<double>();
      r.ess_per_coordinate = j.at("ess_per_coordinate").get<std::vector<double>>();
      r.ess_per_gradient_eval_sequential = j.at("ess_per_gradient_eval").at("sequential").get<std::vector<double>>();
      r.ess_per_gradient_eval_parallel = j.at("ess_per_gradient_eval").at("parallel").get<std::vector<double>>();
      r.w1_per_coordinate = j.at("w1_per_coordinate").get<std::vector<double>>();
      r.gradient_evals_total.sequential = j.at("gradient_evals_total").at("sequential").get<std::uint64_t>();
      r.gradient_evals_total.parallel = j.at("gradient_evals_total").at("parallel").get<std::uint64_t>();
      r.wall_metadata = j.at("wall_metadata");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("diagnostics report: ") + e.what());
    }
    return r;
  }
};

/// ESS per coordinate, and ESS per full-gradient-equivalent (one full
/// gradient = N * d per-datum partial evaluations).
inline DiagnosticsReport summarize_run(const Skeleton& skeleton, const Mat& samples, const GradientCounts& counts,
                                       std::size_t data_size, const Mat* reference = nullptr) {
  DiagnosticsReport r;
  r.event_rate = effective_switching_rate(skeleton);
  r.gradient_evals_total = counts;
  const double full_gradient = static_cast<double>(data_size) * static_cast<double>(samples.cols());
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    const double e = samples.rows() >= 10 ? ess_value(samples, k) : 0.0;
    r.ess_per_coordinate.push_back(e);
    r.ess_per_gradient_eval_sequential.push_back(
        counts.sequential > 0 ? e * full_gradient / static_cast<double>(counts.sequential) : 0.0);
    r.ess_per_gradient_eval_parallel.push_back(
        counts.parallel > 0 ? e * full_gradient / static_cast<double>(counts.parallel) : 0.0);
    if (reference != nullptr) r.w1_per_coordinate.push_back(wasserstein1_marginal(samples, *reference, k));
  }
  return r;
}

}  // namespace fedpdmc
