#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fedpdmc/fedpdmc.hpp"

namespace fs = std::filesystem;
using namespace fedpdmc;

namespace {

int fail(const std::string& what, int code = 1) {
  std::cerr << "fedpdmc: " << what << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated piecewise deterministic Monte Carlo"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seed", seed, "master seed (overrides the config)");
  run->add_option("--out", out, "output directory (overrides the config)");
  run->add_option("--threads", threads, "runs in parallel (overrides the config)");
  bool check_only = false;
  run->add_flag("--check", check_only, "validate the config and print it with defaults filled");

  auto* privacy = app.add_subcommand("privacy", "minimal refreshment rate for (epsilon, delta, K)");
  double epsilon = 1.0, delta = 1e-3, sensitivity = 1.0;
  std::optional<double> rho_in;
  privacy->add_option("--epsilon", epsilon)->required()->check(CLI::PositiveNumber);
  privacy->add_option("--delta", delta)->required()->check(CLI::Range(0.0, 1.0));
  privacy->add_option("--sensitivity", sensitivity)->required()->check(CLI::NonNegativeNumber);
  privacy->add_option("--rho", rho_in, "evaluate this rate instead of the minimal one");

  auto* synth = app.add_subcommand("synth", "write a synthetic data set split across workers");
  std::string model;
  std::string synth_out;
  std::size_t synth_m = 1;
  std::uint64_t synth_seed = 1;
  std::optional<std::size_t> synth_n, synth_d, synth_side;
  synth->add_option("model", model, "gaussian, logistic, ar1 or cox")
      ->required()
      ->check(CLI::IsMember({"gaussian", "logistic", "ar1", "cox"}));
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--workers,-M", synth_m)->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--N", synth_n);
  synth->add_option("--d", synth_d);
  synth->add_option("--grid-side", synth_side);

  auto* diag = app.add_subcommand("diag", "diagnostics of a skeleton CSV");
  std::string skeleton_path;
  double horizon = 0.0, diag_delta = 1e-2, diag_burn = 0.0;
  std::size_t data_size = 1;
  diag->add_option("skeleton", skeleton_path)->required();
  diag->add_option("--horizon", horizon, "process horizon (default: last event time)");
  diag->add_option("--delta", diag_delta)->check(CLI::PositiveNumber);
  diag->add_option("--burn-in", diag_burn)->check(CLI::NonNegativeNumber);
  diag->add_option("--data-size", data_size)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) return fail("cannot read config file " + config_path, 2);
      nlohmann::json j;
      const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      ConfigValidation v = validate_config_text(text);
      if (v.ok()) {
        // command-line overrides go through the same validation
        j = nlohmann::json::parse(text);
        if (seed) j["seed"] = *seed;
        if (out) j["output"] = *out;
        if (threads) j["threads"] = *threads;
        v = validate_config_text(j.dump());
      }
      if (!v.ok()) {
        for (const auto& e : v.errors) std::cerr << "CONFIG_INVALID: " << e << '\n';
        return 2;
      }
      if (check_only) {
        std::cout << v.config->to_json().dump(2) << '\n';
        return 0;
      }
      const auto summary = run_experiment(*v.config, fs::path(config_path).parent_path());
      std::cout << summary.manifest.string() << '\n';
      return 0;
    }
    if (*privacy) {
      const double rho = rho_in ? *rho_in : min_refreshment_rate(epsilon, delta, sensitivity);
      const bool feasible = privacy_feasible(rho, sensitivity, epsilon);
      nlohmann::json j = {{"rho", rho}, {"feasible", feasible}};
      j["delta"] = feasible ? nlohmann::json(achieved_delta(rho, sensitivity, epsilon)) : nlohmann::json(nullptr);
      std::cout << j.dump() << '\n';
      return 0;
    }
    if (*synth) {
      nlohmann::json j = {{"experiment", model}, {"seed", synth_seed}, {"M", synth_m}};
      if (synth_n) j["N"] = *synth_n;
      if (synth_d) j["d"] = *synth_d;
      if (synth_side) j["grid_side"] = *synth_side;
      if (model == "cox") j["prior_mode"] = "server_held";
      const ConfigValidation v = validate_config_text(j.dump());
      if (!v.ok()) {
        for (const auto& e : v.errors) std::cerr << "CONFIG_INVALID: " << e << '\n';
        return 2;
      }
      for (const auto& p : write_synthetic_data(*v.config, synth_m, synth_out)) std::cout << p.string() << '\n';
      return 0;
    }
    if (*diag) {
      std::ifstream in(skeleton_path, std::ios::binary);
      if (!in) return fail("cannot read " + skeleton_path, 2);
      Skeleton sk = read_skeleton_csv(in, horizon);
      const Mat samples = discretized_positions(sk, diag_delta, diag_burn);
      DiagnosticsReport r = summarize_run(sk, samples, GradientCounts{}, data_size);
      r.wall_metadata = {{"skeleton", skeleton_path}, {"horizon", sk.horizon}, {"events", sk.event_count()},
                         {"delta", diag_delta}, {"burn_in", diag_burn}, {"samples", samples.rows()}};
      std::cout << r.to_json().dump(2) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    return fail(e.what());
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  return 0;
}
