#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "romf/error.hpp"
#include "romf/nn/activation.hpp"
#include "romf/uq.hpp"
#include "support/uq_oracles.hpp"

using namespace romf;
using namespace romf::uq;

namespace {

EnsembleSpec tiny_ensemble(std::size_t members) {
  EnsembleSpec s;
  s.members = members;
  s.base_seed = 40;
  s.forecaster.latent = 4;
  s.forecaster.lookback = 3;
  s.forecaster.blocks = {4};
  s.forecaster.dual_head = true;
  return s;
}

nn::Tensor2 waves(std::size_t m, std::size_t T) {
  nn::Tensor2 z(m, T);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < T; ++t) z(i, t) = 0.4 * std::cos(0.15 * static_cast<double>(t) + i);
  return z;
}

}  // namespace

TEST(Nll, ValueAndGradientMatchFiniteDifferences) {
  const std::vector<double> mu{0.3, -1.2, 0.0}, rho{-0.5, 1.0, 2.5}, y{0.1, -0.7, 0.4};
  const auto r = nll(mu, rho, y);
  double expect = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double s2 = std::log1p(std::exp(rho[i])) + 1e-6;
    expect += 0.5 * std::log(s2) + (y[i] - mu[i]) * (y[i] - mu[i]) / (2 * s2);
  }
  EXPECT_NEAR(r.value, expect / 3, 1e-14);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    auto m1 = mu, m2 = mu, r1 = rho, r2 = rho;
    m1[i] -= h, m2[i] += h, r1[i] -= h, r2[i] += h;
    EXPECT_NEAR(r.d_mu[i], (nll(m2, rho, y).value - nll(m1, rho, y).value) / (2 * h), 1e-8);
    EXPECT_NEAR(r.d_rho[i], (nll(mu, r2, y).value - nll(mu, r1, y).value) / (2 * h), 1e-8);
  }
  EXPECT_THROW(nll(mu, rho, std::vector<double>{1.0}), ShapeError);
}

TEST(Aggregate, MatchesMonteCarloMixture) {
  std::mt19937_64 rng(2024);
  const auto members = testsupport::random_members(5, 3, rng);
  const auto agg = ensemble_aggregate(members);
  const auto mc = testsupport::mixture_moments(members, 1'000'000, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_LT(std::abs(agg.mean[i] - mc.mean[i]), 3 * mc.mean_se[i]) << i;
    EXPECT_LT(std::abs(agg.var[i] - mc.var[i]), 3 * mc.var_se[i]) << i;
  }
}

TEST(Aggregate, SingleMemberAndClamp) {
  const GaussianLatent g{{1.0, 2.0}, {0.5, 0.25}};
  const auto a = ensemble_aggregate({g});
  EXPECT_EQ(a.mean, g.mean);
  EXPECT_NEAR(a.var[0], 0.5, 1e-15);
  // Identical members with zero variance and a large mean: any rounding
  // below zero is clamped.
  const GaussianLatent big{{1e8}, {0.0}};
  for (double v : ensemble_aggregate({big, big, big}).var) EXPECT_GE(v, 0.0);
  EXPECT_THROW(ensemble_aggregate({}), ConfigError);
}

TEST(SigmaPoints, ScalarExample) {
  const auto s = sigma_points({{0.0}, {1.0}}, 0.2);
  EXPECT_EQ(s.points(0, 0), 0.0);
  EXPECT_NEAR(s.points(0, 1), std::sqrt(1.2), 1e-15);
  EXPECT_NEAR(s.points(0, 2), -std::sqrt(1.2), 1e-15);
  EXPECT_NEAR(s.weights[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(s.weights[1], 5.0 / 12.0, 1e-15);
  EXPECT_NEAR(s.weights[2], 5.0 / 12.0, 1e-15);
}

TEST(SigmaPoints, WeightsSumToOne) {
  std::mt19937_64 rng(5);
  for (std::size_t m : {1, 2, 7, 50, 125}) {
    for (double k : {0.2, 1.0, 3.0}) {
      const auto g = testsupport::random_members(1, m, rng).front();
      EXPECT_LE(testsupport::weight_sum_error(sigma_points(g, k)), 4 * m * 1e-16) << m << " " << k;
    }
  }
  EXPECT_THROW(sigma_points({{0.0}, {1.0}}, -1.0), ConfigError);
}

TEST(UnscentedTransform, ExactOnAffineDecoders) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 1 + trial * 3, n = 5 + trial;
    const auto g = testsupport::random_members(1, m, rng).front();
    const auto affine = testsupport::random_affine(n, m, rng);
    const auto f = ut_transform(sigma_points(g, 0.2), affine.decoder());
    const auto exact = affine.exact(g);
    for (std::size_t r = 0; r < n; ++r) {
      EXPECT_NEAR(f.mean[r], exact.mean[r], 1e-10);
      EXPECT_NEAR(f.var[r], exact.var[r], 1e-10);
    }
  }
}

TEST(UnscentedTransform, QuadraticMomentsWithClassicK) {
  // y = z^2, z ~ N(mu, s2): E y = mu^2 + s2 and, for k = 3 - m = 2,
  // Var y = 4 mu^2 s2 + 2 s2^2 are reproduced exactly.
  const double mu = 0.7, s2 = 0.3;
  auto square = [](const nn::Tensor2& z) {
    nn::Tensor2 y(1, z.cols());
    for (std::size_t c = 0; c < z.cols(); ++c) y(0, c) = z(0, c) * z(0, c);
    return y;
  };
  const auto f = ut_transform(sigma_points({{mu}, {s2}}, 2.0), square);
  EXPECT_NEAR(f.mean[0], mu * mu + s2, 1e-14);
  EXPECT_NEAR(f.var[0], 4 * mu * mu * s2 + 2 * s2 * s2, 1e-14);
}

TEST(UnscentedTransform, RejectsNonFiniteDecoderOutput) {
  auto bad = [](const nn::Tensor2& z) { return nn::Tensor2(2, z.cols(), NAN); };
  EXPECT_THROW(ut_transform(sigma_points({{0.0}, {1.0}}, 0.2), bad), NumericError);
}

TEST(Ensemble, SeedsAndThreadCountDoNotChangeResults) {
  const auto spec = tiny_ensemble(3);
  const auto z = waves(4, 30);
  const auto w = data::make_windows(30, 3, 18);
  TrainParams p;
  p.epochs = 5;
  p.batch_size = 6;
  std::vector<MemberReport> reports;
  auto serial = ensemble_train(z, w, spec, p, 1, &reports);
  auto parallel = ensemble_train(z, w, spec, p, 3);
  ASSERT_EQ(serial.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(reports[i].seed, 40u + i);
    EXPECT_EQ(serial[i].seed(), 40u + i);
    EXPECT_EQ(serial[i].network().params().flat_values(), parallel[i].network().params().flat_values()) << i;
  }
  EXPECT_NE(serial[0].network().params().flat_values(), serial[1].network().params().flat_values());
}

TEST(Ensemble, RolloutAndPersistence) {
  const auto spec = tiny_ensemble(2);
  const auto z = waves(4, 30);
  const auto w = data::make_windows(30, 3, 18);
  TrainParams p;
  p.epochs = 3;
  p.batch_size = 6;
  auto members = ensemble_train(z, w, spec, p);
  auto decode = [](const nn::Tensor2& l) {
    nn::Tensor2 y(6, l.cols());
    for (std::size_t c = 0; c < l.cols(); ++c)
      for (std::size_t r = 0; r < 6; ++r) y(r, c) = std::tanh(l(r % 4, c)) + 0.1 * r;
    return y;
  };
  const nn::Tensor2 truth = decode(z.columns(3, 27));
  const auto r = uq_rollout(members, z.columns(0, 3), 27, decode, 0.2, Feedback::MemberMean, &truth);
  EXPECT_EQ(r.mean.rows(), 6u);
  EXPECT_EQ(r.mean.cols(), 27u);
  EXPECT_EQ(r.step_error.size(), 27u);
  for (double v : r.var.data()) EXPECT_GE(v, 0.0);
  for (double v : r.latent_var.data()) EXPECT_GT(v, 0.0);

  const auto shared = uq_rollout(members, z.columns(0, 3), 27, decode, 0.2, Feedback::EnsembleMean);
  EXPECT_EQ(shared.mean.cols(), 27u);

  const auto dir = std::filesystem::temp_directory_path() / "romf_uq_test";
  std::filesystem::remove_all(dir);
  save_ensemble(dir, spec, members, {});
  auto loaded = load_ensemble(dir, &spec);
  ASSERT_EQ(loaded.size(), 2u);
  const auto again = uq_rollout(loaded, z.columns(0, 3), 27, decode, 0.2);
  EXPECT_TRUE(std::ranges::equal(again.mean.data(), r.mean.data()));
  auto other = spec;
  other.members = 3;
  EXPECT_THROW(load_ensemble(dir, &other), ConfigError);
  EXPECT_THROW(load_ensemble(dir / "nowhere"), MissingArtifactError);
  std::filesystem::remove_all(dir);
}

TEST(Ensemble, SpecJson) {
  const nlohmann::json j = {{"members", 4}, {"feedback", "ensemble"}, {"forecaster", {{"latent", 8}}}};
  const auto s = j.get<EnsembleSpec>();
  EXPECT_TRUE(s.forecaster.dual_head);
  EXPECT_EQ(s.feedback, Feedback::EnsembleMean);
  EXPECT_EQ(nlohmann::json(nlohmann::json(s).get<EnsembleSpec>()), nlohmann::json(s));
  EXPECT_THROW((nlohmann::json{{"feedback", "vote"}}.get<EnsembleSpec>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"forecaster", {{"dual_head", false}}}}.get<EnsembleSpec>()), ConfigError);
}
