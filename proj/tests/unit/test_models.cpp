#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

#include "fedpdmc/diagnostics.hpp"
#include "fedpdmc/models/ar1.hpp"
#include "fedpdmc/models/cox.hpp"
#include "fedpdmc/models/data_io.hpp"
#include "fedpdmc/models/gaussian.hpp"
#include "fedpdmc/models/logistic.hpp"
#include "fedpdmc/models/synth.hpp"
#include "fedpdmc/samplers.hpp"

using namespace fedpdmc;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

double central_difference(const std::function<double(const Vec&)>& f, Vec x, std::size_t k, double h = 1e-5) {
  const auto i = static_cast<Eigen::Index>(k);
  x[i] += h;
  const double up = f(x);
  x[i] -= 2 * h;
  return (up - f(x)) / (2 * h);
}

void expect_close(double analytic, double numeric) {
  EXPECT_LE(std::abs(analytic - numeric), 1e-6 * std::max(1.0, std::abs(numeric))) << analytic << " vs " << numeric;
}

Mat random_logistic_covariates(RandomStream& rng, std::size_t n, std::size_t d) {
  Mat xi(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    xi(i, 0) = 1.0;
    for (std::size_t k = 1; k < d; ++k) xi(i, k) = rng.normal();
  }
  return xi;
}

Vec random_labels(RandomStream& rng, std::size_t n) {
  Vec eta(n);
  for (std::size_t i = 0; i < n; ++i) eta[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return eta;
}

// Along-ray envelope dominance: for each coordinate the bound built at t0
// must dominate (v_k dU/dx_k)_+ at t0 + s.
void check_bound_dominance(const PotentialSlice& slice, RandomStream& rng, double scale, bool zigzag) {
  const std::size_t d = slice.dim();
  for (int rep = 0; rep < 1000; ++rep) {
    Vec x(d), v(d);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = scale * rng.normal();
      v[k] = zigzag ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : rng.normal();
    }
    auto ray = slice.ray(x, v);
    const std::size_t k = rep % d;
    const double t0 = rng.uniform();
    const RateBound bound = ray->coordinate_bound(k, t0);
    for (double s : {0.0, 0.1 * rng.uniform(), rng.uniform(), 3 * rng.uniform()}) {
      const double rate = std::max(v[k] * slice.partial(x + (t0 + s) * v, k), 0.0);
      EXPECT_LE(rate, bound.value(s) * (1 + 1e-9) + 1e-9) << "k=" << k << " s=" << s;
    }
  }
}

}  // namespace

// ---- Gaussian

TEST(GaussianRate, Coefficients) {
  GaussianSlice g(Vec::Zero(3), Mat::Identity(3, 3));
  auto c = gaussian_rate_coeffs(g, Vec::Unit(3, 0), Vec::Ones(3), 0);
  EXPECT_EQ(c.b, 1.0);
  EXPECT_EQ(c.a, 1.0);
}

TEST(GaussianRate, CenteredAndAntisymmetric) {
  RandomStream rng(1, 1);
  Mat a = Mat::Random(4, 4);
  const Mat p = a * a.transpose() + Mat::Identity(4, 4);
  const Vec mu = Vec::Random(4);
  GaussianSlice g(mu, p);
  Vec v(4);
  for (int k = 0; k < 4; ++k) v[k] = rng.normal();
  const Vec x = Vec::Random(4);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(gaussian_rate_coeffs(g, mu, v, k).b, 0.0);
    const Vec flipped = zigzag_flip(v, k);
    const auto c = gaussian_rate_coeffs(g, x, v, k);
    const auto f = gaussian_rate_coeffs(g, x, flipped, k);
    EXPECT_DOUBLE_EQ(f.b, -c.b);
    // a = v_k sum_i P_ki v_i: flipping v_k negates the off-diagonal part only
    EXPECT_NEAR(f.a, -c.a + 2 * p(k, k) * v[k] * v[k], 1e-12);
    EXPECT_NEAR(c.b, v[k] * p.row(k).dot(x - mu), 1e-12);
  }
}

TEST(GaussianRate, ExactRatesNeverReject) {
  auto g = std::make_shared<GaussianSlice>(Vec::Zero(2), (Mat(2, 2) << 2, 0.5, 0.5, 1).finished());
  auto ray = g->ray(vec({0.3, -1}), vec({1, -1}));
  EXPECT_TRUE(ray->exact());
  RandomStream rng(1, 2);
  for (int i = 0; i < 1000; ++i) {
    auto out = simulate_exact_event_time(ray->coordinate_bound(i % 2, 0.0), rng, kNever);
    EXPECT_EQ(out.proposals_used, 1u);
  }
}

TEST(GaussianRate, SymmetryChecked) {
  EXPECT_THROW(GaussianSlice(Vec::Zero(2), (Mat(2, 2) << 1, 0.5, 0, 1).finished()), Error);
}

TEST(GaussianMeanModel, ConjugatePosterior) {
  RandomStream rng(2, 1);
  const Mat y = synth_gaussian(50, Vec::Constant(3, 0.5), 2.0, rng);
  GaussianMeanModel model(y, 4.0 * Mat::Identity(3, 3), split_evenly(50, 4));
  EXPECT_EQ(model.workers(), 4u);
  EXPECT_EQ(split_evenly(50, 4), (std::vector<std::size_t>{13, 13, 12, 12}));
  // sum of worker potentials has gradient N Sigma^{-1} (x - ybar)
  const Vec x = Vec::Random(3);
  Vec g = Vec::Zero(3);
  for (std::size_t m = 0; m < 4; ++m) g += model.worker_slice(m)->gradient(x);
  EXPECT_LT((g - 50.0 / 4.0 * (x - model.posterior_mean())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((model.posterior_covariance() - 4.0 / 50 * Mat::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

// ---- logistic

TEST(LogisticPartial, SingleObservation) {
  LogisticModel one({{Mat::Identity(1, 2), vec({1})}}, false);
  EXPECT_DOUBLE_EQ(logistic_partial(one, 0, Vec::Zero(2), 0), -0.5);
  LogisticModel zero({{Mat::Identity(1, 2), vec({0})}}, false);
  EXPECT_DOUBLE_EQ(logistic_partial(zero, 0, Vec::Zero(2), 0), 0.5);
  EXPECT_THROW(logistic_partial(zero, 0, Vec::Zero(2), 2), Error);
}

TEST(LogisticPartial, FiniteDifference) {
  RandomStream rng(3, 1);
  std::vector<LogisticModel::Batch> batches;
  for (int m = 0; m < 3; ++m) batches.push_back({random_logistic_covariates(rng, 20, 4), random_labels(rng, 20)});
  LogisticModel model(batches);
  for (int rep = 0; rep < 1000; ++rep) {
    Vec x(4);
    for (int k = 0; k < 4; ++k) x[k] = rng.normal();
    const std::size_t m = rep % 3, k = rep % 4;
    auto worker_potential = [&](const Vec& p) {
      return model.likelihood(m)->potential(p) + model.prior_fraction(m) * model.prior()->potential(p);
    };
    expect_close(logistic_partial(model, m, x, k), central_difference(worker_potential, x, k));
  }
  const Vec x = Vec::Random(4);
  Vec sum = Vec::Zero(4);
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t k = 0; k < 4; ++k) sum[k] += logistic_partial(model, m, x, k);
  EXPECT_LT((sum - model.gradient(x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LogisticPartial, LabelsMustBeBinary) {
  EXPECT_THROW(LogisticLikelihoodSlice(Mat::Ones(1, 2), vec({0.5})), Error);
}

TEST(LogisticHessianBound, Examples) {
  // no data: only the prior, with the full fraction
  LogisticModel empty({{Mat(0, 3), Vec(0)}});
  EXPECT_EQ(logistic_hessian_bound(empty, 0, MatrixNorm::Spectral), 1.0);
  LogisticModel one({{vec({1, 1}).transpose(), vec({1})}}, false);
  EXPECT_DOUBLE_EQ(logistic_hessian_bound(one, 0, MatrixNorm::Spectral), 0.5);
  // ||xi xi'||_inf = |xi|_inf |xi|_1 = 2
  EXPECT_DOUBLE_EQ(logistic_hessian_bound(one, 0, MatrixNorm::Infinity), 0.5);
}

TEST(LogisticHessianBound, DominatesHessianNorm) {
  RandomStream rng(3, 2);
  LogisticModel model({{random_logistic_covariates(rng, 30, 3), random_labels(rng, 30)},
                       {random_logistic_covariates(rng, 10, 3), random_labels(rng, 10)}});
  for (std::size_t m = 0; m < 2; ++m) {
    const double spectral = logistic_hessian_bound(model, m, MatrixNorm::Spectral);
    const double inf = logistic_hessian_bound(model, m, MatrixNorm::Infinity);
    for (int rep = 0; rep < 1000; ++rep) {
      Vec x(3);
      for (int k = 0; k < 3; ++k) x[k] = 3 * rng.normal();
      const Mat h = model.likelihood(m)->hessian(x) + model.prior_fraction(m) * Mat::Identity(3, 3);
      Eigen::SelfAdjointEigenSolver<Mat> eig(h);
      EXPECT_LE(eig.eigenvalues().cwiseAbs().maxCoeff(), spectral * (1 + 1e-12));
      EXPECT_LE(h.cwiseAbs().rowwise().sum().maxCoeff(), inf * (1 + 1e-12));
    }
  }
}

TEST(LogisticRay, EnvelopeDominatesRate) {
  RandomStream rng(3, 3);
  LogisticLikelihoodSlice slice(random_logistic_covariates(rng, 25, 3), random_labels(rng, 25));
  check_bound_dominance(slice, rng, 2.0, true);
  check_bound_dominance(slice, rng, 2.0, false);
}

TEST(LogisticRay, CountsPerDatumEvaluations) {
  RandomStream rng(3, 4);
  LogisticLikelihoodSlice slice(random_logistic_covariates(rng, 25, 3), random_labels(rng, 25));
  auto ray = slice.ray(Vec::Zero(3), Vec::Ones(3));
  ray->directional_partial(0, 0.0);
  ray->directional_partial(1, 0.0);
  EXPECT_EQ(ray->evaluations, 50u);
}

// ---- AR(1)

TEST(Ar1Partials, ZeroResidual) {
  // y_k = c + x y_{k-1} exactly with x = 0.5, c = 1
  Mat y(2, 4);
  y << 0, 1, 1.5, 1.75, 2, 2, 2, 2;
  y(1, 1) = 1 + 0.5 * 2;
  y(1, 2) = 1 + 0.5 * y(1, 1);
  y(1, 3) = 1 + 0.5 * y(1, 2);
  Ar1Slice slice(y, 4.0);
  auto g = ar1_partials(slice, 0.5, 1.0);
  EXPECT_NEAR(g.dx, 0.0, 1e-15);
  EXPECT_NEAR(g.dc, 0.0, 1e-15);
}

TEST(Ar1Partials, SingleTerm) {
  // nu = 1, y_{k-1} = 2, residual x y_{k-1} + c - y_k = 1: h'(1) = 1
  Mat y(1, 2);
  y << 2, 0;
  Ar1Slice slice(y, 1.0);
  auto g = ar1_partials(slice, 0.5, 0.0);
  EXPECT_DOUBLE_EQ(g.dx, 2.0);
  EXPECT_DOUBLE_EQ(g.dc, 1.0);
}

TEST(Ar1Partials, FiniteDifference) {
  RandomStream rng(4, 1);
  const Mat y = synth_ar1(5, 6, 3.0, 0.6, 0.8, rng);
  Ar1Slice slice(y, 3.0);
  EXPECT_EQ(slice.data_count(), 30u);
  for (int rep = 0; rep < 1000; ++rep) {
    const Vec p = vec({rng.normal(), 2 * rng.normal()});
    auto f = [&](const Vec& q) { return slice.potential(q); };
    auto g = ar1_partials(slice, p[0], p[1]);
    expect_close(g.dx, central_difference(f, p, 0));
    expect_close(g.dc, central_difference(f, p, 1));
  }
}

TEST(Ar1HessianBound, Examples) {
  Ar1Slice slice(Mat::Zero(1, 2), 1.0);
  EXPECT_DOUBLE_EQ(ar1_hessian_bound(slice), 2.0);
  for (double nu : {0.5, 1.0, 4.0}) {
    StudentLoss loss{nu};
    double worst = 0.0, worst_first = 0.0;
    for (double z = -100; z <= 100; z += 1e-3) {
      worst = std::max(worst, std::abs(loss.second(z)));
      worst_first = std::max(worst_first, std::abs(loss.first(z)));
    }
    EXPECT_LE(worst, loss.second_bound() * (1 + 1e-12));
    EXPECT_NEAR(worst, loss.second_bound(), 1e-9);  // attained at z = 0
    EXPECT_NEAR(worst_first, loss.first_bound(), 1e-6);
  }
}

TEST(Ar1HessianBound, DominatesHessianNorm) {
  RandomStream rng(4, 2);
  Ar1Slice slice(synth_ar1(4, 5, 2.0, 0.7, -0.3, rng), 2.0);
  const double bound = ar1_hessian_bound(slice);
  for (int rep = 0; rep < 1000; ++rep) {
    const Mat h = slice.hessian(vec({2 * rng.normal(), 3 * rng.normal()}));
    Eigen::SelfAdjointEigenSolver<Mat> eig(h);
    EXPECT_LE(eig.eigenvalues().cwiseAbs().maxCoeff(), bound);
  }
}

TEST(Ar1Ray, EnvelopeDominatesRate) {
  RandomStream rng(4, 3);
  Ar1Slice slice(synth_ar1(6, 5, 4.0, 0.5, 1.0, rng), 4.0);
  check_bound_dominance(slice, rng, 1.0, true);
}

// ---- Cox

TEST(CoxPrior, PositiveDefiniteAtDefaults) {
  const Mat p = cox_prior_precision(4, 0.1, 1.0);
  Eigen::SelfAdjointEigenSolver<Mat> eig(p);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
  // lattice adjacency spectrum: 2 cos(pi i/(g+1)) + 2 cos(pi j/(g+1))
  EXPECT_NEAR(eig.eigenvalues().minCoeff(), 1 - 0.1 * 4 * std::cos(std::numbers::pi / 5), 1e-12);
}

TEST(CoxPrior, IndefiniteCouplingRejected) {
  // on a 4x4 grid alpha = 0.3 is still definite (smallest eigenvalue 1 - 1.2 cos(pi/5) > 0)
  EXPECT_NO_THROW(cox_prior_precision(4, 0.3, 1.0));
  for (std::size_t side : {6, 10}) {
    ASSERT_LT(1 - 0.3 * 4 * std::cos(std::numbers::pi / (side + 1)), 0.0);
    try {
      cox_prior_precision(side, 0.3, 1.0);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid);
      EXPECT_NE(std::string(e.what()).find("positive definite"), std::string::npos);
    }
  }
}

TEST(CoxPartition, BlocksAndChunks) {
  auto blocks = spatial_partition(4, 4);
  ASSERT_EQ(blocks.size(), 4u);
  EXPECT_EQ(blocks[0], (std::vector<std::size_t>{0, 1, 4, 5}));
  EXPECT_EQ(blocks[3], (std::vector<std::size_t>{10, 11, 14, 15}));
  for (std::size_t m : {1, 2, 3, 5, 16}) {
    auto parts = spatial_partition(4, m);
    std::vector<int> seen(16, 0);
    for (const auto& p : parts) {
      EXPECT_FALSE(p.empty());
      for (auto k : p) ++seen[k];
    }
    for (int s : seen) EXPECT_EQ(s, 1);
  }
  EXPECT_THROW(spatial_partition(4, 17), Error);
}

TEST(CoxPartial, Examples) {
  CoxLikelihoodSlice slice(vec({1, 0, 3}), {0, 1});
  EXPECT_EQ(cox_partial(slice, Vec::Zero(3), 0), 0.0);
  EXPECT_EQ(cox_partial(slice, Vec::Zero(3), 1), 1.0);
  try {
    cox_partial(slice, Vec::Zero(3), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NodeNotOwned);
  }
}

TEST(CoxPartial, FiniteDifferenceOnFullPotential) {
  RandomStream rng(5, 1);
  const auto data = synth_cox(3, 0.1, 1.0, rng);
  CoxModel model(3, data.counts, 0.1, 1.0, spatial_partition(3, 3));
  for (int rep = 0; rep < 1000; ++rep) {
    Vec x(9);
    for (int k = 0; k < 9; ++k) x[k] = rng.normal();
    const std::size_t k = rep % 9;
    double analytic = model.prior()->partial(x, k);
    for (std::size_t m = 0; m < model.workers(); ++m)
      if (model.likelihood(m)->owns(k)) analytic += cox_partial(*model.likelihood(m), x, k);
    expect_close(analytic, central_difference([&](const Vec& p) { return model.potential(p); }, x, k));
  }
}

TEST(CoxPropose, AllInfiniteWhenDrifting) {
  CoxLikelihoodSlice slice(vec({0, 0, 5}), {0, 1});
  RandomStream rng(5, 2);
  auto out = cox_propose_event(slice, {Vec::Zero(3), vec({-1, -1, 1}), 0.0}, rng, kNever);
  EXPECT_FALSE(out.finite());
}

TEST(CoxPropose, ConstantEnvelopeIsExponential) {
  // y = 2, v = -1 and e^x negligible: rate is 2 and every proposal is accepted
  CoxLikelihoodSlice slice(vec({2}), {0});
  RandomStream rng(5, 3);
  std::vector<double> taus;
  for (int i = 0; i < 50000; ++i) taus.push_back(cox_propose_event(slice, {vec({-60}), vec({-1}), 0.0}, rng, kNever).tau);
  EXPECT_LT(ks_one_sample(taus, [](double t) { return 1 - std::exp(-2 * t); }).statistic, 0.02);
}

TEST(CoxPropose, SurvivalMatchesNumericalInversion) {
  const Vec counts = vec({2, 0, 1, 4});
  CoxLikelihoodSlice slice(counts, {0, 1, 2, 3});
  const Vec x = vec({0.3, -0.5, 0.1, 1.0});
  const Vec v = vec({1, -1, -1, 1});
  auto rate = [&](double t) {
    double r = 0.0;
    for (int k = 0; k < 4; ++k) r += std::max(v[k] * (std::exp(x[k] + t * v[k]) - counts[k]), 0.0);
    return r;
  };
  // integrated rate by fine trapezoid on a grid
  const double h = 1e-4;
  std::vector<double> grid{0.0};
  for (int i = 1; i * h < 20; ++i) grid.push_back(grid.back() + 0.5 * h * (rate((i - 1) * h) + rate(i * h)));
  auto cdf = [&](double t) {
    const double pos = t / h;
    const auto i = std::min(static_cast<std::size_t>(pos), grid.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return 1 - std::exp(-(grid[i] + frac * (grid[i + 1] - grid[i])));
  };
  RandomStream rng(5, 4);
  std::vector<double> taus;
  for (int i = 0; i < 50000; ++i) taus.push_back(cox_propose_event(slice, {x, v, 0.0}, rng, kNever).tau);
  EXPECT_LT(ks_one_sample(taus, cdf).statistic, 0.02);
}

TEST(CoxModel, RejectsBadData) {
  EXPECT_THROW(CoxModel(2, vec({1, 2, 3}), 0.1, 1.0, spatial_partition(2, 1)), Error);
  EXPECT_THROW(CoxModel(2, vec({1, 2, 3, 0.5}), 0.1, 1.0, spatial_partition(2, 1)), Error);
  EXPECT_THROW(CoxModel(2, vec({1, 2, 3, 4}), 0.1, 1.0, {{0, 1}, {1, 2, 3}}), Error);
}

TEST(CoxRay, EnvelopeDominatesRate) {
  RandomStream rng(5, 5);
  CoxLikelihoodSlice slice(vec({0, 3, 1, 7}), {0, 2, 3});
  check_bound_dominance(slice, rng, 1.0, true);
}

// ---- weighted sums

TEST(WeightedSum, GradientAndRayAreWeighted) {
  RandomStream rng(6, 1);
  auto lik = std::make_shared<LogisticLikelihoodSlice>(random_logistic_covariates(rng, 15, 3), random_labels(rng, 15));
  auto prior = std::make_shared<GaussianSlice>(Vec::Zero(3), Mat::Identity(3, 3), 0);
  WeightedSumSlice sum({{lik, 1.0}, {prior, 0.3}});
  const Vec x = Vec::Random(3);
  EXPECT_LT((sum.gradient(x) - lik->gradient(x) - 0.3 * x).cwiseAbs().maxCoeff(), 1e-12);
  sum.set_weight(1, 0.8);
  EXPECT_LT((sum.gradient(x) - lik->gradient(x) - 0.8 * x).cwiseAbs().maxCoeff(), 1e-12);
  check_bound_dominance(sum, rng, 2.0, true);
}

// ---- synthetic data and files

TEST(Synth, Shapes) {
  RandomStream rng(7, 1);
  auto lg = synth_logistic(100, 4, rng);
  EXPECT_EQ(lg.covariates.col(0), Vec::Ones(100));
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(lg.labels[i] == 0 || lg.labels[i] == 1);
  const Mat ar = synth_ar1(10, 20, 4, 0.5, 1.0, rng);
  EXPECT_EQ(ar.cols(), 21);
  EXPECT_EQ(ar.col(0), Vec::Zero(10));
  auto cox = synth_cox(4, 0.1, 1.0, rng);
  EXPECT_EQ(cox.counts.size(), 16);
  for (int k = 0; k < 16; ++k) EXPECT_EQ(cox.counts[k], std::floor(cox.counts[k]));
}

TEST(Synth, GaussianNoiseScale) {
  RandomStream rng(7, 2);
  const Mat y = synth_gaussian(100000, vec({0.5, -1}), 2.0, rng);
  EXPECT_NEAR(y.col(0).mean(), 0.5, 0.03);
  EXPECT_NEAR((y.col(1).array() + 1).square().mean(), 4.0, 0.08);
}

TEST(DataFiles, TableRoundTrip) {
  const Mat rows = (Mat(2, 3) << 1, 0.1, 1e-20, -3, 1.0 / 3, 7).finished();
  std::stringstream io;
  write_table_csv(io, logistic_columns(2), rows);
  EXPECT_EQ(io.str().substr(0, io.str().find('\n')), "xi1,xi2,eta");
  const Table t = read_table_csv(io);
  EXPECT_EQ(t.header, logistic_columns(2));
  EXPECT_EQ(t.rows, rows);
  EXPECT_NO_THROW(require_columns(t, logistic_columns(2), "logistic"));
  EXPECT_THROW(require_columns(t, gaussian_columns(3), "gaussian"), Error);
}

TEST(DataFiles, RaggedRowReportsLine) {
  std::stringstream io("y1,y2\n1,2\n3\n");
  try {
    read_table_csv(io);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(DataFiles, ManifestRoundTrip) {
  DataManifest m;
  m.model = "cox";
  m.params = {{"grid_side", 4}};
  m.worker_files = {"worker_1.csv", "worker_2.csv"};
  const auto back = DataManifest::from_json(m.to_json());
  EXPECT_EQ(back.model, "cox");
  EXPECT_EQ(back.worker_files, m.worker_files);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(m.to_json()["workers"][1]["id"], 2);
  EXPECT_EQ(cox_columns(), (std::vector<std::string>{"i", "j", "count"}));
  EXPECT_EQ(ar1_columns(2), (std::vector<std::string>{"y0", "y1", "y2"}));
}
