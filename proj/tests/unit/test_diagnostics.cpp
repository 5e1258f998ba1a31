#include <gtest/gtest.h>

#include <cmath>

#include "fedpdmc/diagnostics.hpp"
#include "fedpdmc/models/gaussian.hpp"
#include "fedpdmc/models/logistic.hpp"
#include "fedpdmc/models/synth.hpp"
#include "fedpdmc/samplers.hpp"

using namespace fedpdmc;

namespace {

std::vector<double> normals(std::size_t n, RandomStream& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(SwitchingRate, CountsEventsPerUnitTime) {
  Skeleton s;
  s.horizon = 5.0;
  for (int k = 0; k <= 10; ++k) s.points.push_back({0.4 * k, vec({0}), vec({1})});
  EXPECT_DOUBLE_EQ(effective_switching_rate(s), 2.0);
  Skeleton empty;
  empty.horizon = 3.0;
  empty.points.push_back({0.0, vec({0}), vec({1})});
  EXPECT_EQ(effective_switching_rate(empty), 0.0);
  empty.horizon = 0.0;
  EXPECT_THROW(effective_switching_rate(empty), Error);
}

TEST(SwitchingRate, OneDimensionalZigZagMatchesExpectedAbsGradient) {
  // E|Z|/2 by midpoint quadrature of |z| phi(z)
  double oracle = 0.0;
  const double h = 1e-4;
  for (double z = -12.0 + h / 2; z < 12.0; z += h) oracle += std::abs(z) * std::exp(-0.5 * z * z) * h;
  oracle /= 2.0 * std::sqrt(2.0 * M_PI);
  EXPECT_NEAR(oracle, 1.0 / std::sqrt(2.0 * M_PI), 1e-8);
  RandomStream rng(5, 1);
  MechanismList mech{std::make_shared<ZigZagMechanism>(std::make_shared<GaussianSlice>(Vec::Zero(1), Mat::Identity(1, 1)))};
  auto run = run_pdmc(Flow::linear(), mech, {vec({0}), vec({1}), 0.0}, 2e4, rng);
  EXPECT_NEAR(effective_switching_rate(run.skeleton), oracle, 0.02);
}

TEST(Ess, IidNormal) {
  RandomStream rng(1, 3);
  const auto x = normals(100000, rng);
  const auto r = ess(x);
  EXPECT_GE(r.value / 1e5, 0.9);
  EXPECT_LE(r.value / 1e5, 1.1);
  EXPECT_FALSE(r.constant);
}

TEST(Ess, AutoregressiveSeries) {
  RandomStream rng(2, 3);
  const double phi = 0.5;
  std::vector<double> x(100000);
  x[0] = rng.normal() / std::sqrt(1 - phi * phi);
  for (std::size_t i = 1; i < x.size(); ++i) x[i] = phi * x[i - 1] + rng.normal();
  const double ratio = ess(x).value / static_cast<double>(x.size());
  EXPECT_NEAR(ratio, (1 - phi) / (1 + phi), 0.15 / 3.0);
}

TEST(Ess, AlternatingAndConstant) {
  std::vector<double> alt(1000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
  const auto r = ess(alt);
  EXPECT_GT(r.value, 2000.0);
  EXPECT_TRUE(r.antithetic);
  const auto c = ess(std::vector<double>(50, 3.0));
  EXPECT_TRUE(c.constant);
  EXPECT_EQ(c.value, 0.0);
  EXPECT_THROW(ess(std::vector<double>(5, 1.0)), Error);
}

TEST(Ess, NeverExceedsCountForPositivelyCorrelatedChains) {
  RandomStream rng(3, 3);
  for (double phi : {0.1, 0.5, 0.9, 0.99}) {
    std::vector<double> x(5000);
    x[0] = rng.normal();
    for (std::size_t i = 1; i < x.size(); ++i) x[i] = phi * x[i - 1] + rng.normal();
    const double e = ess(x).value;
    EXPECT_GT(e, 0.0);
    EXPECT_LE(e, 5000.0 * 1.2);
  }
}

TEST(Wasserstein, Examples) {
  const std::vector<double> a{0.0, 1.0}, b{0.0, 3.0};
  EXPECT_DOUBLE_EQ(wasserstein1_marginal(a, b), 1.0);
  RandomStream rng(4, 3);
  auto x = normals(500, rng);
  EXPECT_EQ(wasserstein1_marginal(x, x), 0.0);
  auto y = x;
  for (auto& v : y) v += 0.75;
  EXPECT_NEAR(wasserstein1_marginal(x, y), 0.75, 1e-12);
  EXPECT_THROW(wasserstein1_marginal(std::vector<double>{}, x), Error);
}

TEST(Wasserstein, UnequalSizesMatchCdfIntegral) {
  // W1 = integral |F_a - F_b|; oracle from the step functions on merged support
  RandomStream rng(6, 3);
  for (int rep = 0; rep < 20; ++rep) {
    auto a = normals(7 + rep, rng);
    auto b = normals(13 + 2 * rep, rng);
    std::vector<double> all(a);
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    auto cdf = [](const std::vector<double>& s, double t) {
      return static_cast<double>(std::count_if(s.begin(), s.end(), [&](double v) { return v <= t; })) /
             static_cast<double>(s.size());
    };
    double oracle = 0.0;
    for (std::size_t i = 0; i + 1 < all.size(); ++i)
      oracle += std::abs(cdf(a, all[i]) - cdf(b, all[i])) * (all[i + 1] - all[i]);
    EXPECT_NEAR(wasserstein1_marginal(a, b), oracle, 1e-12);
  }
}

TEST(Wasserstein, Pseudometric) {
  RandomStream rng(7, 3);
  for (int rep = 0; rep < 50; ++rep) {
    auto a = normals(30, rng), b = normals(45, rng), c = normals(60, rng);
    for (auto& v : b) v = 0.5 * v + 1.0;
    for (auto& v : c) v = 2.0 * v - 0.3;
    const double ab = wasserstein1_marginal(a, b), ba = wasserstein1_marginal(b, a);
    const double ac = wasserstein1_marginal(a, c), bc = wasserstein1_marginal(b, c);
    EXPECT_EQ(ab, ba);
    EXPECT_LE(ac, ab + bc + 1e-12);
    EXPECT_LE(ab, ac + bc + 1e-12);
  }
}

TEST(KolmogorovSmirnov, OneAndTwoSample) {
  RandomStream rng(8, 3);
  auto x = normals(20000, rng);
  auto phi = [](double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); };
  auto r = ks_one_sample(x, phi);
  EXPECT_LT(r.statistic, 0.015);
  EXPECT_GT(r.p_value, 1e-3);
  auto shifted = x;
  for (auto& v : shifted) v += 0.1;
  EXPECT_LT(ks_one_sample(shifted, phi).p_value, 1e-6);
  auto y = normals(15000, rng);
  EXPECT_GT(ks_two_sample(x, y).p_value, 1e-3);
  EXPECT_LT(ks_two_sample(shifted, y).p_value, 1e-6);
  EXPECT_DOUBLE_EQ(ks_two_sample(std::vector<double>{0, 1}, std::vector<double>{2, 3}).statistic, 1.0);
}

TEST(ReferenceMetropolis, OneDimensionalMoments) {
  RandomStream rng(9, 3);
  auto potential = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  auto r = reference_mh_sample(potential, Vec::Zero(1), 100000, rng);
  const double mean = r.samples.col(0).mean();
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR((r.samples.col(0).array() - mean).square().mean(), 1.0, 0.05);
  EXPECT_GE(r.acceptance, 0.1);
  EXPECT_LE(r.acceptance, 0.5);
}

TEST(ReferenceMetropolis, CorrelatedGaussian) {
  Mat cov(2, 2);
  cov << 1.0, 0.8, 0.8, 1.0;
  const Mat prec = cov.inverse();
  auto potential = [&](const Vec& x) { return 0.5 * x.dot(prec * x); };
  RandomStream rng(10, 3);
  auto r = reference_mh_sample(potential, Vec::Zero(2), 100000, rng);
  const Mat c = r.samples.rowwise() - r.samples.colwise().mean();
  const Mat est = c.transpose() * c / static_cast<double>(r.samples.rows() - 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(est(i, j), cov(i, j), 0.05 * std::abs(cov(i, j)));
}

TEST(ReferenceMetropolis, FailsWhenAcceptanceCannotAdapt) {
  RandomStream rng(11, 3);
  // a potential that is finite only on a set of measure zero-ish: never accepts
  auto potential = [](const Vec& x) { return x[0] == 0.0 ? 0.0 : std::numeric_limits<double>::infinity(); };
  try {
    reference_mh_sample(potential, Vec::Zero(1), 1000, rng, {.warmup = 2000});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AdaptationFailed);
  }
}

TEST(ReferenceMetropolis, LogisticSelfConsistency) {
  RandomStream data_rng(12, 3);
  auto data = synth_logistic(50, 2, data_rng);
  auto slice = std::make_shared<LogisticLikelihoodSlice>(data.covariates, data.labels);
  auto prior = std::make_shared<GaussianSlice>(Vec::Zero(2), Mat::Identity(2, 2));
  auto potential = [&](const Vec& x) { return slice->potential(x) + prior->potential(x); };
  RandomStream r1(13, 1), r2(13, 2), zz(13, 3);
  const Mat a = reference_mh_sample(potential, Vec::Zero(2), 20000, r1).samples;
  const Mat b = reference_mh_sample(potential, Vec::Zero(2), 20000, r2).samples;
  MechanismList mech{std::make_shared<ZigZagMechanism>(slice), std::make_shared<ZigZagMechanism>(prior)};
  auto run = run_pdmc(Flow::linear(), mech, {Vec::Zero(2), Vec::Ones(2), 0.0}, 4000.0, zz);
  const Mat z = discretized_positions(run.skeleton, 0.2, 100.0);
  for (int k = 0; k < 2; ++k) {
    const double ref_ref = wasserstein1_marginal(a, b, k);
    const double ref_zz = wasserstein1_marginal(a, z, k);
    // ref-ref below 2x ref-zz: the two chains agree at least as well as either agrees with Zig-Zag
    EXPECT_LT(ref_ref, 2.0 * ref_zz + 0.02) << k;
    EXPECT_LT(ref_zz, 0.1) << k;
  }
}

TEST(DiagnosticsReport, JsonRoundTripAndKeys) {
  DiagnosticsReport r;
  r.event_rate = 1.5;
  r.ess_per_coordinate = {10.0, 20.0};
  r.ess_per_gradient_eval_sequential = {0.1, 0.2};
  r.ess_per_gradient_eval_parallel = {0.3, 0.4};
  r.w1_per_coordinate = {0.01, 0.02};
  r.gradient_evals_total = {100, 25};
  r.wall_metadata = {{"M", 4}};
  const auto j = r.to_json();
  for (const char* key : {"event_rate", "ess_per_coordinate", "ess_per_gradient_eval", "w1_per_coordinate",
                          "gradient_evals_total", "wall_metadata"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(DiagnosticsReport::from_json(nlohmann::json::parse(j.dump())).to_json(), j);
  EXPECT_THROW(DiagnosticsReport::from_json(nlohmann::json::object()), Error);
}

TEST(DiagnosticsReport, SummaryIsNonnegativeAndBounded) {
  RandomStream rng(15, 1);
  MechanismList mech{std::make_shared<ZigZagMechanism>(std::make_shared<GaussianSlice>(Vec::Zero(2), Mat::Identity(2, 2)))};
  auto run = run_pdmc(Flow::linear(), mech, {Vec::Zero(2), Vec::Ones(2), 0.0}, 500.0, rng);
  const Mat x = discretized_positions(run.skeleton, 0.5, 50.0);
  auto r = summarize_run(run.skeleton, x, {run.evaluations, run.evaluations}, 1, &x);
  ASSERT_EQ(r.ess_per_coordinate.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_GT(r.ess_per_coordinate[k], 0.0);
    EXPECT_LE(r.ess_per_coordinate[k], 2.0 * static_cast<double>(x.rows()));
    EXPECT_EQ(r.w1_per_coordinate[k], 0.0);
    EXPECT_EQ(r.ess_per_gradient_eval_sequential[k], r.ess_per_gradient_eval_parallel[k]);
  }
}
