#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

// stdout only; stderr is folded in when merge is set
Result cli(const std::string& args, bool merge = false) {
  const std::string cmd = std::string(FEDPDMC_CLI_PATH) + " " + args + (merge ? " 2>&1" : " 2>/dev/null");
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fedpdmc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, PrivacyPrintsJson) {
  auto r = cli("privacy --epsilon 2 --delta 0.36787944117144233 --sensitivity 1");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("rho").get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(j.at("feasible").get<bool>());
  EXPECT_LE(j.at("delta").get<double>(), 0.36787944117144233);
}

TEST(Cli, PrivacyWithGivenRate) {
  auto ok = nlohmann::json::parse(cli("privacy --epsilon 2 --delta 0.1 --sensitivity 1 --rho 1").out);
  EXPECT_NEAR(ok.at("delta").get<double>(), 0.2707, 1e-4);
  auto bad = nlohmann::json::parse(cli("privacy --epsilon 0.5 --delta 0.1 --sensitivity 1 --rho 1").out);
  EXPECT_FALSE(bad.at("feasible").get<bool>());
  EXPECT_TRUE(bad.at("delta").is_null());
}

TEST(Cli, PrivacyRejectsBadArguments) {
  EXPECT_NE(cli("privacy --epsilon -1 --delta 0.1 --sensitivity 1").status, 0);
  EXPECT_NE(cli("privacy --epsilon 1 --sensitivity 1").status, 0);
}

TEST(Cli, RunWritesLayoutAndHonoursOverrides) {
  const auto dir = scratch("run");
  std::ofstream(dir / "c.json") << R"({"experiment": "gaussian", "N": 20, "d": 2, "M": [1, 2], "horizon": 20,
                                      "runs": 1, "reference_samples": 500})";
  auto r = cli("run " + (dir / "c.json").string() + " --out " + (dir / "out").string() + " --seed 5 --threads 2");
  ASSERT_EQ(r.status, 0) << r.out;
  for (const char* f : {"manifest.json", "reference.csv", "run_0/skeleton.csv", "run_0/samples.csv",
                        "run_1/diagnostics.json"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest.at("config").at("seed"), 5);
  EXPECT_EQ(manifest.at("seeds").at("master"), 5);
}

TEST(Cli, RunCheckPrintsDefaults) {
  const auto dir = scratch("check");
  std::ofstream(dir / "c.json") << R"({"experiment": "logistic"})";
  auto r = cli("run --check " + (dir / "c.json").string());
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("N"), 1000);
  EXPECT_EQ(j.at("d"), 6);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, InvalidConfigExitsWithTwo) {
  const auto dir = scratch("invalid");
  std::ofstream(dir / "c.json") << R"({"experiment": "gaussian", "M": 0, "colour": "red"})";
  auto r = cli("run " + (dir / "c.json").string(), true);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("CONFIG_INVALID"), std::string::npos);
  EXPECT_NE(r.out.find("M must be ≥ 1"), std::string::npos);
  EXPECT_NE(r.out.find("colour"), std::string::npos);
  EXPECT_EQ(cli("run " + (dir / "absent.json").string()).status, 2);
}

TEST(Cli, SynthThenDiag) {
  const auto dir = scratch("synth");
  auto r = cli("synth logistic --out " + (dir / "data").string() + " -M 3 --N 30 --d 2");
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(fs::exists(dir / "data" / "worker_3.csv"));
  const auto dm = nlohmann::json::parse(slurp(dir / "data" / "data_manifest.json"));
  EXPECT_EQ(dm.at("model"), "logistic");

  std::ofstream(dir / "c.json") << R"({"experiment": "logistic", "data": "data/data_manifest.json", "M": 3,
                                      "horizon": 30, "runs": 1, "reference_samples": 0})";
  ASSERT_EQ(cli("run " + (dir / "c.json").string() + " --out " + (dir / "out").string()).status, 0);
  auto d = cli("diag " + (dir / "out" / "run_0" / "skeleton.csv").string() + " --horizon 30 --burn-in 3");
  ASSERT_EQ(d.status, 0);
  const auto j = nlohmann::json::parse(d.out);
  EXPECT_GT(j.at("event_rate").get<double>(), 0.0);
  EXPECT_EQ(j.at("ess_per_coordinate").size(), 2u);
  EXPECT_EQ(j.at("wall_metadata").at("horizon"), 30.0);
}

TEST(Cli, SynthRejectsUnknownModel) {
  EXPECT_NE(cli("synth poisson --out " + scratch("bad").string()).status, 0);
  EXPECT_EQ(cli("synth cox --out " + scratch("cox").string() + " -M 4 --grid-side 10").status, 0);
}

TEST(Cli, DiagMissingFile) { EXPECT_EQ(cli("diag /nonexistent/skeleton.csv").status, 2); }
