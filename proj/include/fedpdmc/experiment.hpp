#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fedpdmc/diagnostics.hpp"
#include "fedpdmc/federated.hpp"
#include "fedpdmc/hash.hpp"
#include "fedpdmc/models/ar1.hpp"
#include "fedpdmc/models/cox.hpp"
#include "fedpdmc/models/data_io.hpp"
#include "fedpdmc/models/gaussian.hpp"
#include "fedpdmc/models/logistic.hpp"
#include "fedpdmc/models/synth.hpp"
#include "fedpdmc/privacy.hpp"
#include "fedpdmc/skeleton_io.hpp"

namespace fedpdmc {

enum class Experiment { Gaussian, Logistic, Ar1, Cox, PrivacyCalc };

inline const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::Gaussian: return "gaussian";
    case Experiment::Logistic: return "logistic";
    case Experiment::Ar1: return "ar1";
    case Experiment::Cox: return "cox";
    case Experiment::PrivacyCalc: return "privacy";
  }
  return "?";
}

struct ExperimentConfig {
  Experiment experiment = Experiment::Gaussian;
  std::vector<std::size_t> M{1};
  std::size_t N = 50;
  std::size_t d = 10;
  double horizon = 100.0;
  double delta = 1e-2;
  double burn_in = 10.0;
  std::uint64_t seed = 1;
  std::size_t runs = 20;
  PriorMode prior_mode = PriorMode::ProportionalSplit;
  double lambda_redist = 0.1;
  double refresh_rate = 0.0;
  SamplerKind sampler = SamplerKind::ZigZag;
  // model parameters
  double alpha = 1.0;  // Gaussian noise scale, or Cox spatial coupling
  double beta = 1.0;   // Cox precision scale
  double nu = 4.0;
  std::size_t K = 20;  // AR(1) steps per trajectory
  std::size_t grid_side = 4;
  double true_mean = 0.5;
  double true_x = 0.5;
  double true_c = 1.0;
  // privacy calculator
  double epsilon = 1.0;
  double privacy_delta = 1e-3;
  double sensitivity = 1.0;
  // plumbing
  std::string data;  // data manifest; empty means synthesize
  std::string output = "out";
  std::size_t threads = 1;
  bool run_log = false;
  std::size_t reference_samples = 100000;
  std::size_t reference_thin = 10;

  std::size_t dim() const {
    switch (experiment) {
      case Experiment::Ar1: return 2;
      case Experiment::Cox: return grid_side * grid_side;
      default: return d;
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"experiment", to_string(experiment)},
                        {"M", M},
                        {"N", N},
                        {"d", d},
                        {"horizon", horizon},
                        {"delta", delta},
                        {"burn_in", burn_in},
                        {"seed", seed},
                        {"runs", runs},
                        {"prior_mode", to_string(prior_mode)},
                        {"lambda_redist", lambda_redist},
                        {"refresh_rate", refresh_rate},
                        {"sampler", sampler == SamplerKind::ZigZag ? "zigzag" : "bps"},
                        {"alpha", alpha},
                        {"beta", beta},
                        {"nu", nu},
                        {"K", K},
                        {"grid_side", grid_side},
                        {"true_mean", true_mean},
                        {"true_x", true_x},
                        {"true_c", true_c},
                        {"epsilon", epsilon},
                        {"privacy_delta", privacy_delta},
                        {"sensitivity", sensitivity},
                        {"data", data},
                        {"output", output},
                        {"threads", threads},
                        {"run_log", run_log},
                        {"reference_samples", reference_samples},
                        {"reference_thin", reference_thin}};
    return j;
  }
};

struct ConfigValidation {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;

  bool ok() const { return config.has_value(); }
  std::string message() const {
    std::string out;
    for (const auto& e : errors) out += (out.empty() ? "" : "\n") + e;
    return out;
  }
};

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::vector<std::string>& errors) : j_(j), errors_(errors) {}

  template <class T>
  void number(const char* key, T& out, bool positive, bool allow_zero = false) {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) return fail(key, "must be a number");
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) return fail(key, "must be a nonnegative integer");
      out = static_cast<T>(v.get<long long>());
    } else {
      out = v.get<T>();
    }
    if (positive && !(out > T{0}) && !(allow_zero && out == T{0})) fail(key, allow_zero ? "must be nonnegative" : "must be positive");
  }
  void boolean(const char* key, bool& out) {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_boolean()) return fail(key, "must be true or false");
    out = j_.at(key).get<bool>();
  }
  void string(const char* key, std::string& out) {
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) return fail(key, "must be a string");
    out = j_.at(key).get<std::string>();
  }
  void fail(const std::string& key, const std::string& what) { errors_.push_back("field '" + key + "': " + what); }

 private:
  const nlohmann::json& j_;
  std::vector<std::string>& errors_;
};

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "experiment", "M",        "N",          "d",         "horizon",       "delta",       "burn_in",
      "seed",       "runs",     "prior_mode", "lambda_redist", "refresh_rate", "sampler",  "alpha",
      "beta",       "nu",       "K",          "grid_side", "true_mean",     "true_x",      "true_c",
      "epsilon",    "privacy_delta", "sensitivity", "data", "output",      "threads",     "run_log",
      "reference_samples", "reference_thin"};
  return keys;
}

/// Parse and validate a JSON config; unknown keys and every constraint
/// violation are reported.
inline ConfigValidation validate_config_text(const std::string& text) {
  ConfigValidation result;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    result.errors.push_back("parse error at line " + std::to_string(detail::line_of_offset(text, offset)) + ": " +
                            e.what());
    return result;
  }
  if (!j.is_object()) {
    result.errors.push_back("config must be a JSON object");
    return result;
  }
  auto& errors = result.errors;
  for (const auto& [key, _] : j.items())
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end())
      errors.push_back("unknown key '" + key + "'");

  ExperimentConfig c;
  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    bool known = false;
    if (e.is_string())
      for (auto kind : {Experiment::Gaussian, Experiment::Logistic, Experiment::Ar1, Experiment::Cox,
                        Experiment::PrivacyCalc})
        if (e.get<std::string>() == to_string(kind)) {
          c.experiment = kind;
          known = true;
        }
    if (!known) errors.push_back("field 'experiment': must be one of gaussian, logistic, ar1, cox, privacy");
  } else {
    errors.push_back("field 'experiment': required");
  }

  // Experiment-specific defaults, overridden by explicit keys below.
  switch (c.experiment) {
    case Experiment::Gaussian: c.N = 50; c.d = 10; c.alpha = 1.0; break;
    case Experiment::Logistic: c.N = 1000; c.d = 6; break;
    case Experiment::Ar1: c.N = 100; c.d = 2; c.K = 20; c.nu = 4.0; break;
    case Experiment::Cox:
      c.M = {4};
      c.alpha = 0.1;
      c.beta = 1.0;
      c.grid_side = 4;
      c.delta = 1e-3;
      c.prior_mode = PriorMode::ServerHeld;
      break;
    case Experiment::PrivacyCalc: break;
  }

  detail::ConfigReader r(j, errors);
  if (j.contains("M")) {
    const auto& m = j.at("M");
    std::vector<long long> values;
    bool shape_ok = true;
    if (m.is_number_integer()) {
      values.push_back(m.get<long long>());
    } else if (m.is_array() && !m.empty()) {
      for (const auto& x : m) {
        if (!x.is_number_integer()) shape_ok = false;
        else values.push_back(x.get<long long>());
      }
    } else {
      shape_ok = false;
    }
    if (!shape_ok) {
      errors.push_back("field 'M': must be an integer or a nonempty list of integers");
    } else if (std::any_of(values.begin(), values.end(), [](long long v) { return v < 1; })) {
      errors.push_back("M must be ≥ 1");
    } else {
      c.M.assign(values.begin(), values.end());
    }
  }
  r.number("N", c.N, true);
  r.number("d", c.d, true);
  r.number("horizon", c.horizon, true);
  r.number("delta", c.delta, true);
  c.burn_in = 0.1 * c.horizon;
  r.number("burn_in", c.burn_in, true, true);
  r.number("seed", c.seed, false);
  r.number("runs", c.runs, true);
  if (j.contains("prior_mode")) {
    try {
      c.prior_mode = prior_mode_from_string(j.at("prior_mode").get<std::string>());
    } catch (const std::exception&) {
      errors.push_back(
          "field 'prior_mode': must be one of server_held, proportional_split, extra_worker, dynamic_redistribution");
    }
  }
  r.number("lambda_redist", c.lambda_redist, true);
  r.number("refresh_rate", c.refresh_rate, true, true);
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    if (s == "zigzag") c.sampler = SamplerKind::ZigZag;
    else if (s == "bps") c.sampler = SamplerKind::Bps;
    else errors.push_back("field 'sampler': must be zigzag or bps");
  }
  r.number("alpha", c.alpha, false);
  r.number("beta", c.beta, true);
  r.number("nu", c.nu, true);
  r.number("K", c.K, true);
  r.number("grid_side", c.grid_side, true);
  r.number("true_mean", c.true_mean, false);
  r.number("true_x", c.true_x, false);
  r.number("true_c", c.true_c, false);
  r.number("epsilon", c.epsilon, true);
  r.number("privacy_delta", c.privacy_delta, true);
  r.number("sensitivity", c.sensitivity, true, true);
  r.string("data", c.data);
  r.string("output", c.output);
  r.number("threads", c.threads, true);
  r.boolean("run_log", c.run_log);
  r.number("reference_samples", c.reference_samples, false);
  r.number("reference_thin", c.reference_thin, true);

  if (c.experiment == Experiment::Gaussian && c.alpha <= 0.0) errors.push_back("field 'alpha': must be positive");
  if (c.burn_in >= c.horizon) errors.push_back("field 'burn_in': must be smaller than horizon");
  if (c.privacy_delta >= 1.0) errors.push_back("field 'privacy_delta': must lie in (0, 1)");
  if (c.experiment != Experiment::PrivacyCalc && c.data.empty()) {
    for (auto m : c.M) {
      const std::size_t units = c.experiment == Experiment::Cox ? c.grid_side * c.grid_side : c.N;
      if (m > units) errors.push_back("M = " + std::to_string(m) + " exceeds the number of data units " + std::to_string(units));
    }
  }
  if (c.experiment == Experiment::Cox) {
    try {
      cox_prior_precision(c.grid_side, c.alpha, c.beta);
    } catch (const Error& e) {
      errors.push_back(std::string("field 'alpha': ") + e.what());
    }
    if (c.prior_mode != PriorMode::ServerHeld && c.prior_mode != PriorMode::ExtraWorker)
      errors.push_back("field 'prior_mode': cox supports server_held or extra_worker");
  }
  if (c.prior_mode == PriorMode::DynamicRedistribution && c.experiment != Experiment::Logistic &&
      c.experiment != Experiment::PrivacyCalc)
    errors.push_back("field 'prior_mode': dynamic_redistribution needs a model with a prior (logistic)");
  if (errors.empty()) result.config = c;
  return result;
}

inline ConfigValidation validate_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {std::nullopt, {"cannot read config file " + path.string()}};
  return validate_config_text(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

/// Everything a run needs about the posterior, independent of M.
struct PreparedModel {
  Experiment experiment = Experiment::Gaussian;
  std::size_t dim = 0;
  std::size_t data_size = 0;  // N, used to normalize gradient counts
  std::function<double(const Vec&)> potential;
  std::function<FederatedProblem(std::size_t M)> problem;
  std::function<Mat(std::size_t n, RandomStream& rng)> exact_reference;  // empty if unavailable
  Vec reference_start;
  std::size_t fixed_workers = 0;  // nonzero when the data files fix M
  nlohmann::json data_record = nlohmann::json::object();
  std::vector<std::filesystem::path> input_files;
};

namespace detail {

inline std::vector<Mat> split_rows(const Mat& rows, const std::vector<std::size_t>& sizes) {
  std::vector<Mat> parts;
  Eigen::Index begin = 0;
  for (auto n : sizes) {
    parts.push_back(rows.middleRows(begin, static_cast<Eigen::Index>(n)));
    begin += static_cast<Eigen::Index>(n);
  }
  return parts;
}

inline Mat stack_rows(const std::vector<Mat>& parts) {
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Mat out(rows, parts.empty() ? 0 : parts.front().cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p;
    r += p.rows();
  }
  return out;
}

}  // namespace detail

/// Loads the data manifest or synthesizes data from the seed.
/// With a data manifest, the data fix N, d (or K) and the grid side; the
/// config's values for these are replaced by what the worker files hold.
inline ExperimentConfig adopt_data_shape(ExperimentConfig c, const std::filesystem::path& base = {}) {
  if (c.data.empty() || c.experiment == Experiment::PrivacyCalc) return c;
  const std::filesystem::path path = base.empty() ? std::filesystem::path(c.data) : base / c.data;
  DataManifest manifest;
  try {
    manifest = DataManifest::from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  std::size_t rows = 0, cols = 0;
  for (const auto& f : manifest.worker_files) {
    const Table t = read_table_file(path.parent_path() / f);
    rows += static_cast<std::size_t>(t.rows.rows());
    cols = t.header.size();
  }
  detail::require(cols >= 2 || c.experiment == Experiment::Gaussian, ErrorCode::ParseError,
                  "worker files have too few columns");
  switch (c.experiment) {
    case Experiment::Gaussian: c.d = cols; c.N = rows; break;
    case Experiment::Logistic: c.d = cols - 1; c.N = rows; break;
    case Experiment::Ar1: c.K = cols - 1; c.N = rows; break;
    case Experiment::Cox:
      c.grid_side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(rows))));
      detail::require(c.grid_side * c.grid_side == rows, ErrorCode::ParseError, "cox data must cover a square grid");
      break;
    case Experiment::PrivacyCalc: break;
  }
  return c;
}

inline PreparedModel prepare_model(const ExperimentConfig& c, const std::filesystem::path& base = {}) {
  PreparedModel pm;
  pm.experiment = c.experiment;
  pm.dim = c.dim();
  RandomStream data_rng(mix_seed(c.seed, 0xDA7A), kSynthesisStream);

  std::optional<DataManifest> manifest;
  std::filesystem::path data_dir;
  std::vector<Table> tables;
  if (!c.data.empty()) {
    const std::filesystem::path path = base.empty() ? std::filesystem::path(c.data) : base / c.data;
    try {
      manifest = DataManifest::from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    detail::require(manifest->model == to_string(c.experiment), ErrorCode::ConfigInvalid,
                    "data manifest is for model '" + manifest->model + "'");
    data_dir = path.parent_path();
    pm.input_files.push_back(path);
    for (const auto& f : manifest->worker_files) {
      pm.input_files.push_back(data_dir / f);
      tables.push_back(read_table_file(data_dir / f));
    }
    pm.fixed_workers = tables.size();
    pm.data_record = {{"source", "files"}, {"manifest", c.data}};
  } else {
    pm.data_record = {{"source", "synthetic"}, {"seed", mix_seed(c.seed, 0xDA7A)}};
  }

  switch (c.experiment) {
    case Experiment::Gaussian: {
      Mat y;
      std::vector<std::size_t> fixed_sizes;
      if (manifest) {
        std::vector<Mat> parts;
        for (const auto& t : tables) {
          require_columns(t, gaussian_columns(c.d), "gaussian data");
          parts.push_back(t.rows);
          fixed_sizes.push_back(static_cast<std::size_t>(t.rows.rows()));
        }
        y = detail::stack_rows(parts);
      } else {
        y = synth_gaussian(c.N, Vec::Constant(static_cast<Eigen::Index>(c.d), c.true_mean), c.alpha, data_rng);
      }
      const Mat sigma = c.alpha * c.alpha * Mat::Identity(static_cast<Eigen::Index>(c.d), static_cast<Eigen::Index>(c.d));
      pm.data_size = static_cast<std::size_t>(y.rows());
      auto full = std::make_shared<GaussianMeanModel>(y, sigma, std::vector<std::size_t>{pm.data_size});
      pm.potential = [full](const Vec& x) { return full->worker_slice(0)->potential(x); };
      pm.problem = [y, sigma, fixed_sizes](std::size_t M) {
        const auto sizes = fixed_sizes.empty() ? split_evenly(static_cast<std::size_t>(y.rows()), M) : fixed_sizes;
        GaussianMeanModel model(y, sigma, sizes);
        FederatedProblem p;
        for (std::size_t m = 0; m < sizes.size(); ++m) {
          p.likelihoods.push_back(model.worker_slice(m));
          p.prior_fractions.push_back(static_cast<double>(sizes[m]) / static_cast<double>(y.rows()));
        }
        return p;
      };
      pm.exact_reference = [full](std::size_t n, RandomStream& rng) {
        const Vec mean = full->posterior_mean();
        const Mat chol = Eigen::LLT<Mat>(full->posterior_covariance()).matrixL();
        Mat out(static_cast<Eigen::Index>(n), mean.size());
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
          Vec z(mean.size());
          for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.normal();
          out.row(i) = (mean + chol * z).transpose();
        }
        return out;
      };
      pm.reference_start = full->posterior_mean();
      break;
    }
    case Experiment::Logistic: {
      Mat xi;
      Vec eta;
      std::vector<std::size_t> fixed_sizes;
      if (manifest) {
        std::vector<Mat> parts;
        for (const auto& t : tables) {
          require_columns(t, logistic_columns(c.d), "logistic data");
          parts.push_back(t.rows);
          fixed_sizes.push_back(static_cast<std::size_t>(t.rows.rows()));
        }
        const Mat all = detail::stack_rows(parts);
        xi = all.leftCols(static_cast<Eigen::Index>(c.d));
        eta = all.col(static_cast<Eigen::Index>(c.d));
      } else {
        auto data = synth_logistic(c.N, c.d, data_rng);
        xi = std::move(data.covariates);
        eta = std::move(data.labels);
        pm.data_record["truth"] = std::vector<double>(data.truth.data(), data.truth.data() + data.truth.size());
      }
      pm.data_size = static_cast<std::size_t>(xi.rows());
      auto full = std::make_shared<LogisticModel>(std::vector<LogisticModel::Batch>{{xi, eta}});
      pm.potential = [full](const Vec& x) { return full->potential(x); };
      pm.problem = [xi, eta, fixed_sizes](std::size_t M) {
        const auto sizes = fixed_sizes.empty() ? split_evenly(static_cast<std::size_t>(xi.rows()), M) : fixed_sizes;
        std::vector<LogisticModel::Batch> batches;
        Eigen::Index begin = 0;
        for (auto n : sizes) {
          const auto rows = static_cast<Eigen::Index>(n);
          batches.push_back({xi.middleRows(begin, rows), eta.segment(begin, rows)});
          begin += rows;
        }
        LogisticModel model(std::move(batches));
        FederatedProblem p;
        for (std::size_t m = 0; m < model.workers(); ++m) {
          p.likelihoods.push_back(model.likelihood(m));
          p.prior_fractions.push_back(model.prior_fraction(m));
        }
        p.prior = model.prior();
        return p;
      };
      pm.reference_start = Vec::Zero(static_cast<Eigen::Index>(c.d));
      break;
    }
    case Experiment::Ar1: {
      Mat y;
      std::vector<std::size_t> fixed_sizes;
      if (manifest) {
        std::vector<Mat> parts;
        for (const auto& t : tables) {
          require_columns(t, ar1_columns(c.K), "ar1 data");
          parts.push_back(t.rows);
          fixed_sizes.push_back(static_cast<std::size_t>(t.rows.rows()));
        }
        y = detail::stack_rows(parts);
      } else {
        y = synth_ar1(c.N, c.K, c.nu, c.true_x, c.true_c, data_rng);
      }
      pm.data_size = static_cast<std::size_t>(y.rows() * (y.cols() - 1));
      auto full = std::make_shared<Ar1Slice>(y, c.nu);
      pm.potential = [full](const Vec& x) { return full->potential(x); };
      const double nu = c.nu;
      pm.problem = [y, nu, fixed_sizes](std::size_t M) {
        const auto sizes = fixed_sizes.empty() ? split_evenly(static_cast<std::size_t>(y.rows()), M) : fixed_sizes;
        FederatedProblem p;
        for (const auto& part : detail::split_rows(y, sizes)) {
          p.likelihoods.push_back(std::make_shared<Ar1Slice>(part, nu));
          p.prior_fractions.push_back(static_cast<double>(part.rows()) / static_cast<double>(y.rows()));
        }
        return p;
      };
      pm.reference_start = (Vec(2) << c.true_x, c.true_c).finished();
      break;
    }
    case Experiment::Cox: {
      const std::size_t side = c.grid_side;
      Vec counts = Vec::Zero(static_cast<Eigen::Index>(side * side));
      std::vector<std::vector<std::size_t>> fixed_parts;
      if (manifest) {
        std::vector<int> seen(side * side, 0);
        for (const auto& t : tables) {
          require_columns(t, cox_columns(), "cox data");
          std::vector<std::size_t> part;
          for (Eigen::Index r = 0; r < t.rows.rows(); ++r) {
            const double i = t.rows(r, 0), j = t.rows(r, 1);
            detail::require(i >= 1 && j >= 1 && i <= static_cast<double>(side) && j <= static_cast<double>(side) &&
                                i == std::floor(i) && j == std::floor(j),
                            ErrorCode::ParseError, "cox data: node (" + std::to_string(i) + ", " + std::to_string(j) + ") outside the grid");
            const auto node = static_cast<std::size_t>(i - 1) * side + static_cast<std::size_t>(j - 1);
            counts[static_cast<Eigen::Index>(node)] = t.rows(r, 2);
            ++seen[node];
            part.push_back(node);
          }
          fixed_parts.push_back(std::move(part));
        }
        for (int s : seen) detail::require(s == 1, ErrorCode::ConfigInvalid, "cox data must list every node exactly once");
      } else {
        auto data = synth_cox(side, c.alpha, c.beta, data_rng);
        counts = data.counts;
        pm.data_record["latent"] = std::vector<double>(data.latent.data(), data.latent.data() + data.latent.size());
      }
      pm.data_size = side * side;
      auto full = std::make_shared<CoxModel>(side, counts, c.alpha, c.beta,
                                             std::vector<std::vector<std::size_t>>{spatial_partition(side, 1)});
      pm.potential = [full](const Vec& x) { return full->potential(x); };
      const double alpha = c.alpha, beta = c.beta;
      pm.problem = [side, counts, alpha, beta, fixed_parts](std::size_t M) {
        auto model = std::make_shared<CoxModel>(side, counts, alpha, beta,
                                                fixed_parts.empty() ? spatial_partition(side, M) : fixed_parts);
        FederatedProblem p;
        for (std::size_t m = 0; m < model->workers(); ++m) {
          p.likelihoods.push_back(model->likelihood(m));
          p.prior_fractions.push_back(0.0);
        }
        p.prior = model->prior();
        p.likelihood_mechanism = [model](std::size_t m) -> std::shared_ptr<const Mechanism> {
          return std::make_shared<CoxRecipeMechanism>(model->likelihood(m));
        };
        return p;
      };
      pm.reference_start = Vec::Zero(static_cast<Eigen::Index>(side * side));
      break;
    }
    case Experiment::PrivacyCalc:
      throw Error(ErrorCode::InvalidArgument, "the privacy calculator has no model");
  }
  return pm;
}

/// Writes worker data files and a data manifest for a synthetic instance.
inline std::vector<std::filesystem::path> write_synthetic_data(const ExperimentConfig& c, std::size_t M,
                                                               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  RandomStream rng(mix_seed(c.seed, 0xDA7A), kSynthesisStream);
  DataManifest manifest;
  manifest.model = to_string(c.experiment);
  manifest.params = {{"seed", c.seed}, {"N", c.N}, {"d", c.d}};
  std::vector<std::filesystem::path> written;
  auto emit = [&](std::size_t m, const std::vector<std::string>& header, const Mat& rows) {
    const std::string name = "worker_" + std::to_string(m + 1) + ".csv";
    std::ofstream out(dir / name, std::ios::binary);
    write_table_csv(out, header, rows);
    manifest.worker_files.emplace_back(name);
    written.push_back(dir / name);
  };
  switch (c.experiment) {
    case Experiment::Gaussian: {
      const Mat y = synth_gaussian(c.N, Vec::Constant(static_cast<Eigen::Index>(c.d), c.true_mean), c.alpha, rng);
      const auto parts = detail::split_rows(y, split_evenly(c.N, M));
      for (std::size_t m = 0; m < M; ++m) emit(m, gaussian_columns(c.d), parts[m]);
      break;
    }
    case Experiment::Logistic: {
      const auto data = synth_logistic(c.N, c.d, rng);
      Mat all(data.covariates.rows(), data.covariates.cols() + 1);
      all << data.covariates, data.labels;
      const auto parts = detail::split_rows(all, split_evenly(c.N, M));
      for (std::size_t m = 0; m < M; ++m) emit(m, logistic_columns(c.d), parts[m]);
      break;
    }
    case Experiment::Ar1: {
      manifest.params["K"] = c.K;
      manifest.params["nu"] = c.nu;
      const Mat y = synth_ar1(c.N, c.K, c.nu, c.true_x, c.true_c, rng);
      const auto parts = detail::split_rows(y, split_evenly(c.N, M));
      for (std::size_t m = 0; m < M; ++m) emit(m, ar1_columns(c.K), parts[m]);
      break;
    }
    case Experiment::Cox: {
      manifest.params = {{"seed", c.seed}, {"grid_side", c.grid_side}, {"alpha", c.alpha}, {"beta", c.beta}};
      const auto data = synth_cox(c.grid_side, c.alpha, c.beta, rng);
      const auto parts = spatial_partition(c.grid_side, M);
      for (std::size_t m = 0; m < M; ++m) {
        Mat rows(static_cast<Eigen::Index>(parts[m].size()), 3);
        for (std::size_t r = 0; r < parts[m].size(); ++r) {
          const auto node = parts[m][r];
          rows.row(static_cast<Eigen::Index>(r)) << static_cast<double>(node / c.grid_side + 1),
              static_cast<double>(node % c.grid_side + 1), data.counts[static_cast<Eigen::Index>(node)];
        }
        emit(m, cox_columns(), rows);
      }
      break;
    }
    case Experiment::PrivacyCalc:
      throw Error(ErrorCode::InvalidArgument, "no data for the privacy calculator");
  }
  std::ofstream(dir / "data_manifest.json", std::ios::binary) << manifest.to_json().dump(2) << '\n';
  written.push_back(dir / "data_manifest.json");
  return written;
}

inline FederationConfig federation_config(const ExperimentConfig& c, std::uint64_t run_seed) {
  FederationConfig f;
  f.prior_mode = c.prior_mode;
  f.lambda_redist = c.lambda_redist;
  f.refresh_rate = c.refresh_rate;
  f.horizon = c.horizon;
  f.seed = run_seed;
  f.sampler = c.sampler;
  f.record_log = c.run_log;
  return f;
}

/// x = 0 and v drawn from the velocity law on a stream reserved for it.
inline PhaseState initial_state(std::size_t d, SamplerKind sampler, std::uint64_t run_seed) {
  RandomStream rng(run_seed, kSynthesisStream + 1);
  return {Vec::Zero(static_cast<Eigen::Index>(d)), refresh_velocity(default_velocity(sampler, d), rng), 0.0};
}

inline std::uint64_t run_seed(std::uint64_t seed, std::size_t run_index) { return mix_seed(seed, run_index + 1); }

struct RunOutput {
  std::size_t index = 0;
  std::size_t M = 1;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  FederatedRun run;
  Mat samples;
  DiagnosticsReport report;
};

/// One federated run plus its discretized samples and diagnostics.
inline RunOutput execute_run(const ExperimentConfig& c, const PreparedModel& pm, std::size_t M, std::size_t index,
                             std::size_t repetition, const Mat* reference) {
  RunOutput out;
  out.index = index;
  out.M = M;
  out.repetition = repetition;
  out.seed = run_seed(c.seed, index);
  const FederationConfig fc = federation_config(c, out.seed);
  out.run = run_federated(fc, pm.problem(M), initial_state(pm.dim, c.sampler, out.seed));
  out.samples = discretized_positions(out.run.skeleton, c.delta, c.burn_in);
  out.report = summarize_run(out.run.skeleton, out.samples, out.run.evaluations, pm.data_size, reference);
  out.report.wall_metadata = {{"experiment", to_string(c.experiment)},
                              {"M", M},
                              {"run", index},
                              {"repetition", repetition},
                              {"seed", out.seed},
                              {"horizon", c.horizon},
                              {"delta", c.delta},
                              {"burn_in", c.burn_in},
                              {"events", out.run.skeleton.event_count()},
                              {"rounds", out.run.rounds},
                              {"redistribution_epochs", out.run.redistribution_epochs},
                              {"prior_mode", to_string(c.prior_mode)}};
  return out;
}

inline Mat reference_sample(const ExperimentConfig& c, const PreparedModel& pm) {
  RandomStream rng(mix_seed(c.seed, 0x4EF), kSynthesisStream + 2);
  if (pm.exact_reference) return pm.exact_reference(c.reference_samples, rng);
  MetropolisOptions opt;
  opt.thin = c.reference_thin;
  return reference_mh_sample(pm.potential, pm.reference_start, c.reference_samples, rng, opt).samples;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  detail::require(static_cast<bool>(out), ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

inline std::string samples_csv(const Mat& samples) {
  std::ostringstream out;
  write_table_csv(out, numbered_columns("x", 1, static_cast<std::size_t>(samples.cols())), samples);
  return out.str();
}

}  // namespace detail

struct ExperimentSummary {
  std::filesystem::path manifest;
  std::vector<RunOutput> runs;
};

/// Runs every (M, repetition) pair and writes
/// <out>/run_<k>/{skeleton.csv, samples.csv, diagnostics.json} plus <out>/manifest.json.
inline ExperimentSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& config_dir = {},
                                        bool keep_runs = false) {
  const ExperimentConfig c = adopt_data_shape(config, config_dir);
  const std::filesystem::path out_dir(c.output);
  std::filesystem::create_directories(out_dir);
  nlohmann::json files = nlohmann::json::array();
  auto record = [&](const std::filesystem::path& path, const std::string& content) {
    detail::write_text(path, content);
    files.push_back({{"path", std::filesystem::relative(path, out_dir).generic_string()},
                     {"sha256", sha256_hex(content)},
                     {"bytes", content.size()}});
  };

  ExperimentSummary summary;
  nlohmann::json manifest = {{"config", c.to_json()}};
  nlohmann::json inputs = nlohmann::json::array();
  const std::string config_text = c.to_json().dump(2);
  inputs.push_back({{"name", "config (normalized)"}, {"git_sha1", git_blob_sha1(config_text)}});

  if (c.experiment == Experiment::PrivacyCalc) {
    const double rho = min_refreshment_rate(c.epsilon, c.privacy_delta, c.sensitivity);
    const bool feasible = privacy_feasible(rho, c.sensitivity, c.epsilon);
    const double achieved = feasible ? achieved_delta(rho, c.sensitivity, c.epsilon) : 1.0;
    record(out_dir / "privacy.json",
           nlohmann::json{{"rho", rho}, {"delta", achieved}, {"feasible", feasible}}.dump(2) + "\n");
  } else {
    const PreparedModel pm = prepare_model(c, config_dir);
    for (const auto& f : pm.input_files)
      inputs.push_back({{"name", f.generic_string()}, {"git_sha1", git_blob_sha1(read_file(f))}});
    manifest["data"] = pm.data_record;

    std::vector<std::size_t> m_values = c.M;
    if (pm.fixed_workers > 0) {
      detail::require(c.M.size() == 1 && (c.M.front() == pm.fixed_workers || c.M.front() == 1),
                      ErrorCode::ConfigInvalid,
                      "the data manifest fixes M = " + std::to_string(pm.fixed_workers));
      m_values = {pm.fixed_workers};
    }

    Mat reference;
    if (c.reference_samples > 0) {
      reference = reference_sample(c, pm);
      record(out_dir / "reference.csv", detail::samples_csv(reference));
    }
    const Mat* ref = c.reference_samples > 0 ? &reference : nullptr;

    struct Job {
      std::size_t M, index, repetition;
    };
    std::vector<Job> jobs;
    for (auto M : m_values)
      for (std::size_t r = 0; r < c.runs; ++r) jobs.push_back({M, jobs.size(), r});

    std::vector<std::optional<RunOutput>> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::size_t next = 0;
    std::mutex lock;
    auto worker = [&] {
      for (;;) {
        std::size_t j;
        {
          std::lock_guard<std::mutex> guard(lock);
          if (next >= jobs.size()) return;
          j = next++;
        }
        try {
          results[j] = execute_run(c, pm, jobs[j].M, jobs[j].index, jobs[j].repetition, ref);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      }
    };
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 1; t < std::min(c.threads, jobs.size()); ++t) pool.emplace_back(worker);
      worker();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    nlohmann::json runs = nlohmann::json::array();
    for (auto& res : results) {
      const std::filesystem::path dir = out_dir / ("run_" + std::to_string(res->index));
      std::filesystem::create_directories(dir);
      std::ostringstream skel;
      write_skeleton_csv(skel, res->run.skeleton);
      record(dir / "skeleton.csv", skel.str());
      record(dir / "samples.csv", detail::samples_csv(res->samples));
      record(dir / "diagnostics.json", res->report.to_json().dump(2) + "\n");
      if (c.run_log) {
        std::ostringstream log;
        write_run_log(log, res->run.log);
        record(dir / "run_log.jsonl", log.str());
      }
      runs.push_back({{"index", res->index},
                      {"M", res->M},
                      {"repetition", res->repetition},
                      {"seed", res->seed},
                      {"dir", dir.filename().generic_string()}});
      if (keep_runs) summary.runs.push_back(std::move(*res));
      res.reset();
    }
    manifest["runs"] = runs;
  }
  manifest["seeds"] = {{"master", c.seed}, {"data", mix_seed(c.seed, 0xDA7A)}, {"reference", mix_seed(c.seed, 0x4EF)}};
  manifest["inputs"] = inputs;
  manifest["files"] = files;
  summary.manifest = out_dir / "manifest.json";
  detail::write_text(summary.manifest, manifest.dump(2) + "\n");
  return summary;
}

}  // namespace fedpdmc
