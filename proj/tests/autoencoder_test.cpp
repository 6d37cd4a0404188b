#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "romf/autoencoder.hpp"
#include "romf/error.hpp"
#include "romf/evalmetrics.hpp"
#include "romf/log.hpp"

using namespace romf;
using namespace romf::ae;

namespace {

// n x T columns of a Gaussian pulse moving right, already in [0, 1].
nn::Tensor2 pulses(std::size_t n, std::size_t T) {
  nn::Tensor2 v(n, T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / n, c = 0.2 + 0.6 * t / T;
      v(i, t) = 0.1 + 0.8 * std::exp(-(x - c) * (x - c) / 0.01);
    }
  return v;
}

AutoencoderSpec small_cae(std::size_t nodes) {
  AutoencoderSpec s;
  s.nodes = nodes;
  s.stages = {{4, 2}, {6, 2}};
  return s;
}

}  // namespace

TEST(Autoencoder, DefaultLatentSizes) {
  data::ProblemConfig p;
  EXPECT_EQ(AutoencoderSpec::cae_default(p).latent_dim(), 50u);
  p.kind = "stoker";
  const auto s = AutoencoderSpec::cae_default(p);
  EXPECT_EQ(s.latent_dim(), 125u);
  EXPECT_EQ(s.stages, (std::vector<ConvStage>{{8, 2}, {32, 2}, {32, 2}}));
  EXPECT_EQ(AutoencoderSpec::mlp_default(p, 25).hidden, (std::vector<std::size_t>{500, 250}));
}

TEST(Autoencoder, CaeEncoderHasNoDenseLayer) {
  data::ProblemConfig p;
  const auto net = build_autoencoder(AutoencoderSpec::cae_default(p));
  const std::string enc = net.at(0).describe();
  EXPECT_EQ(enc.find("Dense"), std::string::npos) << enc;
  EXPECT_NE(enc.find("Conv1D"), std::string::npos) << enc;
}

TEST(Autoencoder, ShapesAndFiniteZeroLatent) {
  for (const char* type : {"cae", "mlp"}) {
    auto spec = small_cae(32);
    spec.type = type;
    spec.hidden = {16};
    spec.latent = 5;
    TrainedAutoencoder model(spec, 1);
    const auto v = pulses(32, 7);
    const auto z = model.encode(v);
    EXPECT_EQ(z.rows(), spec.latent_dim()) << type;
    EXPECT_EQ(z.cols(), 7u);
    const auto back = model.decode(z);
    EXPECT_EQ(back.rows(), 32u);
    EXPECT_TRUE(model.decode(nn::Tensor2(spec.latent_dim(), 1)).all_finite());
    EXPECT_EQ(model.encode(v).data().size(), z.data().size());
    EXPECT_TRUE(std::ranges::equal(model.encode(v).data(), z.data()));
    EXPECT_THROW(model.decode(nn::Tensor2(spec.latent_dim() + 1, 1)), ShapeError);
  }
}

TEST(Autoencoder, MirroredDecoderLengths) {
  auto spec = small_cae(40);
  spec.stages = {{3, 2}, {3, 5}};
  TrainedAutoencoder model(spec, 2);
  EXPECT_EQ(spec.latent_dim(), 4u);
  EXPECT_EQ(model.decode(nn::Tensor2(4, 2)).rows(), 40u);
  spec.nodes = 42;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Autoencoder, WarnsOnUnscaledInput) {
  std::string seen;
  auto prev = set_warning_sink([&](std::string_view m) { seen = m; });
  TrainedAutoencoder model(small_cae(16), 1);
  model.encode(nn::Tensor2(16, 1, 5.0));
  set_warning_sink(prev);
  EXPECT_NE(seen.find("far outside [0, 1]"), std::string::npos) << seen;
}

TEST(Autoencoder, TrainingIsDeterministicAndLearns) {
  const auto v = pulses(32, 40);
  const auto split = data::make_ae_split(40, 32, 8, 3);
  TrainParams p;
  p.epochs = 60;
  p.batch_size = 8;
  p.lr = 3e-3;
  p.seed = 4;
  auto a = train_autoencoder(v, split, small_cae(32), p);
  auto b = train_autoencoder(v, split, small_cae(32), p);
  EXPECT_EQ(a.network().params().flat_values(), b.network().params().flat_values());
  const auto& h = a.history();
  EXPECT_LT(h.epochs.back().train_loss, h.epochs.front().train_loss);
  EXPECT_LT(metrics::relative_l2(v.data(), a.decode(a.encode(v)).data()), 0.5);
}

TEST(Autoencoder, CheckpointRoundTripAndRefusal) {
  auto spec = small_cae(32);
  TrainedAutoencoder model(spec, 6);
  const auto dir = std::filesystem::temp_directory_path() / "romf_ae_test";
  std::filesystem::remove_all(dir);
  model.save(dir / "ae.ckpt");
  auto loaded = TrainedAutoencoder::load(dir / "ae.ckpt", &spec);
  const auto v = pulses(32, 3);
  EXPECT_TRUE(std::ranges::equal(loaded.encode(v).data(), model.encode(v).data()));
  auto other = spec;
  other.kernel = 3;
  EXPECT_THROW(TrainedAutoencoder::load(dir / "ae.ckpt", &other), ConfigError);
  EXPECT_THROW(TrainedAutoencoder::load(dir / "none.ckpt"), MissingArtifactError);
  std::filesystem::remove_all(dir);
}

TEST(Autoencoder, SpecJson) {
  const nlohmann::json j = {{"type", "cae"}, {"nodes", 1000}, {"stages", {{8, 2}, {32, 2}, {32, 2}}}};
  const auto s = j.get<AutoencoderSpec>();
  EXPECT_EQ(s.latent_dim(), 125u);
  EXPECT_EQ(nlohmann::json(nlohmann::json(s).get<AutoencoderSpec>()), nlohmann::json(s));
  EXPECT_THROW((nlohmann::json{{"stages", {{8}}}}.get<AutoencoderSpec>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"activation", "gelu"}}.get<AutoencoderSpec>()), ConfigError);
}
