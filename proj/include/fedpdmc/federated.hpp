#pragma once

#include <algorithm>
#include <barrier>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fedpdmc/core.hpp"
#include "fedpdmc/potential.hpp"
#include "fedpdmc/random.hpp"
#include "fedpdmc/rates.hpp"
#include "fedpdmc/samplers.hpp"

namespace fedpdmc {

/// The only data a worker sends to the server.
struct EventProposal {
  int worker_id = 0;
  double tau = kNever;
  Vec new_velocity;

  bool finite() const { return std::isfinite(tau); }
};

/// Nonnegative prior shares summing to one.
struct PriorWeights {
  Vec alpha;
};

/// Symmetric Dirichlet(1): normalized standard exponentials.
inline PriorWeights resample_prior_weights(std::size_t m, RandomStream& rng) {
  detail::require(m >= 1, ErrorCode::InvalidArgument, "M must be >= 1");
  PriorWeights w;
  w.alpha = Vec::Ones(static_cast<Eigen::Index>(m));
  if (m == 1) return w;
  for (Eigen::Index i = 0; i < w.alpha.size(); ++i) w.alpha[i] = rng.exponential();
  w.alpha /= w.alpha.sum();
  return w;
}

enum class PriorMode { ServerHeld, ProportionalSplit, ExtraWorker, DynamicRedistribution };
enum class SamplerKind { ZigZag, Bps };

inline const char* to_string(PriorMode mode) {
  switch (mode) {
    case PriorMode::ServerHeld: return "server_held";
    case PriorMode::ProportionalSplit: return "proportional_split";
    case PriorMode::ExtraWorker: return "extra_worker";
    case PriorMode::DynamicRedistribution: return "dynamic_redistribution";
  }
  return "?";
}

inline PriorMode prior_mode_from_string(const std::string& name) {
  for (auto mode : {PriorMode::ServerHeld, PriorMode::ProportionalSplit, PriorMode::ExtraWorker,
                    PriorMode::DynamicRedistribution})
    if (name == to_string(mode)) return mode;
  throw Error(ErrorCode::ConfigInvalid, "unknown prior_mode '" + name + "'");
}

struct FederationConfig {
  PriorMode prior_mode = PriorMode::ProportionalSplit;
  double lambda_redist = 0.0;
  /// Constant refreshment rate added to every data-holding worker.
  double refresh_rate = 0.0;
  double horizon = 100.0;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::ZigZag;
  double proposal_horizon = 1e6;
  ThinningOptions thinning;
  bool record_log = false;

  void validate() const {
    detail::require(horizon > 0.0, ErrorCode::ConfigInvalid, "horizon must be positive");
    detail::require(refresh_rate >= 0.0, ErrorCode::ConfigInvalid, "refresh_rate must be nonnegative");
    detail::require(proposal_horizon > 0.0, ErrorCode::ConfigInvalid, "proposal_horizon must be positive");
    if (prior_mode == PriorMode::DynamicRedistribution)
      detail::require(lambda_redist > 0.0, ErrorCode::ConfigInvalid,
                      "lambda_redist must be positive for dynamic redistribution");
  }
};

/// A worker: private potential slice, private mechanisms and private stream.
class ModelWorker {
 public:
  ModelWorker(int id, RandomStream stream, MechanismList mechanisms,
              std::shared_ptr<WeightedSumSlice> reweighted = nullptr)
      : id_(id), stream_(stream), mechanisms_(std::move(mechanisms)), reweighted_(std::move(reweighted)) {
    detail::require(id >= 1, ErrorCode::InvalidArgument, "worker ids start at 1");
  }

  int id() const { return id_; }
  std::uint64_t evaluations() const { return evaluations_; }
  const RandomStream& stream() const { return stream_; }

  EventProposal propose(const PhaseState& state, const Flow& flow, double proposal_horizon) {
    EventProposal out;
    out.worker_id = id_;
    try {
      Proposal p = propose_first(mechanisms_, state, flow, stream_, proposal_horizon, evaluations_);
      out.tau = p.tau;
      out.new_velocity = std::move(p.velocity);
    } catch (const AcceptRatioExceeded& e) {
      throw AcceptRatioExceeded(e.ratio(), id_);
    }
    return out;
  }

  /// Set this worker's share of the prior (its slice must be reweighted).
  void set_prior_weight(double alpha) {
    detail::require(reweighted_ != nullptr, ErrorCode::InvalidArgument,
                    "worker " + std::to_string(id_) + " holds no prior share");
    reweighted_->set_weight(1, alpha);
  }
  bool holds_prior_share() const { return reweighted_ != nullptr; }

 private:
  int id_;
  RandomStream stream_;
  MechanismList mechanisms_;
  std::shared_ptr<WeightedSumSlice> reweighted_;
  std::uint64_t evaluations_ = 0;
};

inline EventProposal worker_propose(ModelWorker& worker, const PhaseState& state, const Flow& flow = Flow::linear(),
                                    double proposal_horizon = 1e6) {
  return worker.propose(state, flow, proposal_horizon);
}

/// Earliest proposal; exact ties go to the smallest worker id.
inline EventProposal server_select(std::span<const EventProposal> proposals) {
  detail::require(!proposals.empty(), ErrorCode::InvalidArgument, "no proposals");
  const EventProposal* best = nullptr;
  for (const auto& p : proposals) {
    if (!p.finite()) continue;
    if (best == nullptr || p.tau < best->tau || (p.tau == best->tau && p.worker_id < best->worker_id)) best = &p;
  }
  if (best == nullptr) throw Error(ErrorCode::AllInfinite, "every proposal is infinite");
  return *best;
}

/// Moves proposals between the coordinator and the workers. Implementations
/// return proposals ordered by worker id.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::size_t size() const = 0;
  /// Proposals from `state`; events later than `cutoff` come back as never.
  virtual std::vector<EventProposal> collect(std::uint64_t round, const PhaseState& state, double cutoff) = 0;
  /// alpha[m] goes to the m-th worker holding a prior share.
  virtual void set_prior_weights(const Vec& alpha) = 0;
  /// Cumulative per-worker evaluation counts.
  virtual std::vector<std::uint64_t> evaluations() const = 0;
};

/// Workers living in this process. With threads > 1 the propose step runs on
/// a persistent pool; each worker only touches its own stream, so the result
/// does not depend on scheduling.
class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::vector<ModelWorker> workers, Flow flow, std::size_t threads = 1)
      : workers_(std::move(workers)), flow_(std::move(flow)) {
    detail::require(!workers_.empty(), ErrorCode::InvalidArgument, "no workers");
    threads = std::clamp<std::size_t>(threads, 1, workers_.size());
    if (threads > 1) start_pool(threads);
  }
  ~InProcessTransport() override { stop_pool(); }
  InProcessTransport(const InProcessTransport&) = delete;
  InProcessTransport& operator=(const InProcessTransport&) = delete;

  std::size_t size() const override { return workers_.size(); }

  std::vector<EventProposal> collect(std::uint64_t, const PhaseState& state, double cutoff) override {
    results_.assign(workers_.size(), {});
    errors_.assign(workers_.size(), nullptr);
    if (pool_.empty()) {
      for (std::size_t m = 0; m < workers_.size(); ++m) results_[m] = workers_[m].propose(state, flow_, cutoff);
      return results_;
    }
    state_ = &state;
    cutoff_ = cutoff;
    start_->arrive_and_wait();
    done_->arrive_and_wait();
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
    return results_;
  }

  void set_prior_weights(const Vec& alpha) override {
    Eigen::Index j = 0;
    for (auto& w : workers_)
      if (w.holds_prior_share()) w.set_prior_weight(alpha[j++]);
    detail::require(j == alpha.size(), ErrorCode::DimensionMismatch, "one prior weight per sharing worker");
  }

  std::vector<std::uint64_t> evaluations() const override {
    std::vector<std::uint64_t> out;
    for (const auto& w : workers_) out.push_back(w.evaluations());
    return out;
  }

  const std::vector<ModelWorker>& workers() const { return workers_; }

 private:
  void start_pool(std::size_t threads) {
    start_ = std::make_unique<std::barrier<>>(static_cast<std::ptrdiff_t>(threads + 1));
    done_ = std::make_unique<std::barrier<>>(static_cast<std::ptrdiff_t>(threads + 1));
    for (std::size_t t = 0; t < threads; ++t)
      pool_.emplace_back([this, t, threads] {
        for (;;) {
          start_->arrive_and_wait();
          if (stopping_) return;
          for (std::size_t m = t; m < workers_.size(); m += threads) {
            try {
              results_[m] = workers_[m].propose(*state_, flow_, cutoff_);
            } catch (...) {
              errors_[m] = std::current_exception();
            }
          }
          done_->arrive_and_wait();
        }
      });
  }
  void stop_pool() {
    if (pool_.empty()) return;
    stopping_ = true;
    start_->arrive_and_wait();
    pool_.clear();
  }

  std::vector<ModelWorker> workers_;
  Flow flow_;
  double cutoff_ = kNever;
  std::vector<EventProposal> results_;
  std::vector<std::exception_ptr> errors_;
  const PhaseState* state_ = nullptr;
  std::unique_ptr<std::barrier<>> start_;
  std::unique_ptr<std::barrier<>> done_;
  std::vector<std::jthread> pool_;
  bool stopping_ = false;
};

/// A federated posterior: per-worker likelihood slices plus an optional prior.
struct FederatedProblem {
  std::vector<std::shared_ptr<const PotentialSlice>> likelihoods;
  /// Worker m's proportional prior share, n_m / N.
  std::vector<double> prior_fractions;
  std::shared_ptr<const PotentialSlice> prior;
  /// Optional replacement for the Zig-Zag mechanism on a pure likelihood slice.
  std::function<std::shared_ptr<const Mechanism>(std::size_t m)> likelihood_mechanism;
  /// Optional covariance for BPS reflections; empty means identity.
  Mat sigma;

  std::size_t dim() const { return likelihoods.empty() ? 0 : likelihoods.front()->dim(); }
  std::size_t workers() const { return likelihoods.size(); }
};

struct Federation {
  std::vector<ModelWorker> workers;
  MechanismList server_mechanisms;
  /// Workers whose prior share is redistributed.
  std::size_t sharing_workers = 0;
};

inline VelocityDistribution default_velocity(SamplerKind kind, std::size_t d) {
  return kind == SamplerKind::ZigZag ? VelocityDistribution::uniform_signs(d) : VelocityDistribution::gaussian(d);
}

inline Federation build_federation(const FederatedProblem& problem, const FederationConfig& config) {
  config.validate();
  detail::require(problem.workers() >= 1, ErrorCode::InvalidArgument, "M must be >= 1");
  const std::size_t d = problem.dim();
  const std::size_t m_count = problem.workers();
  const bool has_prior = problem.prior != nullptr;
  if (has_prior && config.prior_mode == PriorMode::ProportionalSplit)
    detail::require(problem.prior_fractions.size() == m_count, ErrorCode::InvalidArgument,
                    "one prior fraction per worker");

  auto mechanism_for = [&](std::shared_ptr<const PotentialSlice> slice) -> std::shared_ptr<const Mechanism> {
    if (config.sampler == SamplerKind::ZigZag) return std::make_shared<ZigZagMechanism>(slice, config.thinning);
    return std::make_shared<BpsMechanism>(slice, problem.sigma, config.thinning);
  };
  const VelocityDistribution nu = default_velocity(config.sampler, d);

  Federation fed;
  for (std::size_t m = 0; m < m_count; ++m) {
    const int id = static_cast<int>(m + 1);
    MechanismList mechanisms;
    std::shared_ptr<WeightedSumSlice> reweighted;
    const auto& lik = problem.likelihoods[m];
    detail::require(lik != nullptr && lik->dim() == d, ErrorCode::DimensionMismatch, "worker slices disagree on d");
    if (has_prior && config.prior_mode == PriorMode::ProportionalSplit) {
      auto slice = std::make_shared<WeightedSumSlice>(std::vector<WeightedSumSlice::Term>{
          {lik, 1.0}, {problem.prior, problem.prior_fractions[m]}});
      mechanisms.push_back(mechanism_for(slice));
    } else if (has_prior && config.prior_mode == PriorMode::DynamicRedistribution) {
      reweighted = std::make_shared<WeightedSumSlice>(std::vector<WeightedSumSlice::Term>{
          {lik, 1.0}, {problem.prior, 1.0 / static_cast<double>(m_count)}});
      mechanisms.push_back(mechanism_for(reweighted));
      ++fed.sharing_workers;
    } else if (problem.likelihood_mechanism) {
      mechanisms.push_back(problem.likelihood_mechanism(m));
    } else {
      mechanisms.push_back(mechanism_for(lik));
    }
    if (config.refresh_rate > 0.0) mechanisms.push_back(std::make_shared<RefreshMechanism>(config.refresh_rate, nu));
    fed.workers.emplace_back(id, worker_stream(config.seed, id), std::move(mechanisms), std::move(reweighted));
  }
  if (has_prior && config.prior_mode == PriorMode::ExtraWorker) {
    const int id = static_cast<int>(m_count + 1);
    fed.workers.emplace_back(id, worker_stream(config.seed, id), MechanismList{mechanism_for(problem.prior)});
  }
  if (has_prior && config.prior_mode == PriorMode::ServerHeld) fed.server_mechanisms.push_back(mechanism_for(problem.prior));
  return fed;
}

/// Evaluation totals: summed over workers (sequential cost) and the
/// per-round maximum over workers and server (parallel cost).
struct GradientCounts {
  std::uint64_t sequential = 0;
  std::uint64_t parallel = 0;
};

struct RoundRecord {
  std::uint64_t round = 0;
  int selected_worker = 0;  // 0: server-held prior or redistribution epoch
  double tau = 0.0;
  double event_time = 0.0;
  bool redistribution = false;
};

inline nlohmann::json to_json(const RoundRecord& r) {
  return {{"round", r.round},
          {"selected_worker", r.selected_worker},
          {"tau", r.tau},
          {"event_time", r.event_time},
          {"redistribution", r.redistribution}};
}

inline void write_run_log(std::ostream& out, const std::vector<RoundRecord>& log) {
  for (const auto& r : log) out << to_json(r).dump() << '\n';
}

struct FederatedRun {
  Skeleton skeleton;
  std::vector<RoundRecord> log;
  std::uint64_t rounds = 0;
  std::uint64_t redistribution_epochs = 0;
  GradientCounts evaluations;
};

/// The coordinator loop. Each round every worker proposes from the current
/// state, the server adds its own candidates (server-held prior, redistribution
/// clock), and the earliest wins.
inline FederatedRun run_federated(const FederationConfig& config, Transport& transport, const Flow& flow,
                                  const PhaseState& init, const MechanismList& server_mechanisms = {},
                                  std::size_t sharing_workers = 0) {
  config.validate();
  detail::require(init.x.size() == init.v.size() && init.x.size() > 0, ErrorCode::DimensionMismatch,
                  "initial state dimensions");
  const bool redistribute = config.prior_mode == PriorMode::DynamicRedistribution && sharing_workers > 0;
  RandomStream server = server_stream(config.seed);

  FederatedRun run;
  run.skeleton.flow = flow;
  run.skeleton.horizon = config.horizon;
  PhaseState state{init.x, init.v, 0.0};
  run.skeleton.points.push_back({0.0, state.x, state.v});

  if (redistribute) transport.set_prior_weights(resample_prior_weights(sharing_workers, server).alpha);

  std::vector<std::uint64_t> before = transport.evaluations();
  std::uint64_t server_evals = 0;
  for (std::uint64_t round = 0;; ++round) {
    // Events past the run horizon can never be adopted, so nobody simulates beyond it.
    const double remaining = config.horizon - state.t;
    const double cutoff = std::min(config.proposal_horizon, remaining);
    std::vector<EventProposal> proposals = transport.collect(round, state, cutoff);

    const std::uint64_t server_before = server_evals;
    EventProposal server_candidate;
    if (!server_mechanisms.empty()) {
      Proposal p = propose_first(server_mechanisms, state, flow, server, cutoff, server_evals);
      server_candidate.tau = p.tau;
      server_candidate.new_velocity = std::move(p.velocity);
    }
    const double tau_redist = redistribute ? server.exponential() / config.lambda_redist : kNever;

    const std::vector<std::uint64_t> after = transport.evaluations();
    std::uint64_t round_max = server_evals - server_before;
    run.evaluations.sequential += server_evals - server_before;
    for (std::size_t m = 0; m < after.size(); ++m) {
      const std::uint64_t delta = after[m] - before[m];
      run.evaluations.sequential += delta;
      round_max = std::max(round_max, delta);
    }
    run.evaluations.parallel += round_max;
    before = after;

    EventProposal selected;
    selected.tau = kNever;
    for (const auto& p : proposals)
      if (p.finite() && (p.tau < selected.tau || (p.tau == selected.tau && p.worker_id < selected.worker_id)))
        selected = p;
    if (server_candidate.tau < selected.tau) selected = std::move(server_candidate);
    if (!selected.finite() && !std::isfinite(tau_redist) && config.proposal_horizon < remaining)
      throw Error(ErrorCode::AllInfinite, "round " + std::to_string(round) + " at t=" + std::to_string(state.t) +
                                              ": no worker proposed an event within " +
                                              std::to_string(config.proposal_horizon) + " time units");

    const bool is_redist = tau_redist < selected.tau;
    const double tau = is_redist ? tau_redist : selected.tau;
    if (state.t + tau > config.horizon) break;
    ++run.rounds;
    state = flow_evaluate(flow, state, tau);
    if (is_redist) {
      transport.set_prior_weights(resample_prior_weights(sharing_workers, server).alpha);
      ++run.redistribution_epochs;
    } else {
      state.v = std::move(selected.new_velocity);
      run.skeleton.points.push_back({state.t, state.x, state.v});
    }
    if (config.record_log)
      run.log.push_back({round, is_redist ? 0 : selected.worker_id, tau, state.t, is_redist});
  }
  return run;
}

/// Builds the workers for `problem` and runs them in this process.
inline FederatedRun run_federated(const FederationConfig& config, const FederatedProblem& problem,
                                  const PhaseState& init, const Flow& flow = Flow::linear(), std::size_t threads = 1) {
  Federation fed = build_federation(problem, config);
  InProcessTransport transport(std::move(fed.workers), flow, threads);
  return run_federated(config, transport, flow, init, fed.server_mechanisms, fed.sharing_workers);
}

inline FederatedRun run_federated_redistribution(const FederationConfig& config, const FederatedProblem& problem,
                                                 const PhaseState& init, std::size_t threads = 1) {
  detail::require(config.prior_mode == PriorMode::DynamicRedistribution, ErrorCode::ConfigInvalid,
                  "prior_mode must be dynamic_redistribution");
  detail::require(problem.prior != nullptr, ErrorCode::ConfigInvalid, "redistribution needs a prior");
  return run_federated(config, problem, init, Flow::linear(), threads);
}

}  // namespace fedpdmc
