#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "romf/error.hpp"
#include "romf/nn/layers.hpp"
#include "romf/nn/optim.hpp"
#include "support/gradcheck.hpp"
#include "support/layer_cases.hpp"

using namespace romf;
using namespace romf::nn;

namespace {

// Single-layer network whose parameters are overwritten by the caller.
struct Probe {
  Network net;
  explicit Probe(const LayerSpec& spec) : net(make_seq(spec), 1) {}
  static Sequential make_seq(const LayerSpec& spec) {
    Sequential s;
    s.add(spec);
    return s;
  }
  void set(std::size_t block, std::vector<double> v) {
    auto dst = net.params().values(block);
    ASSERT_EQ(dst.size(), v.size());
    std::copy(v.begin(), v.end(), dst.begin());
  }
};

Batch row(std::vector<double> v) {
  Batch b(1, 1, v.size());
  std::copy(v.begin(), v.end(), b.data().begin());
  return b;
}

std::vector<double> flat(const Batch& b) { return {b.data().begin(), b.data().end()}; }

// Literal nested-loop dilated convolution, valid padding, one channel.
std::vector<double> naive_conv(const std::vector<double>& v, const std::vector<double>& k, std::size_t d) {
  std::vector<double> out;
  for (std::size_t s = 0; s + (k.size() - 1) * d < v.size(); ++s) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) acc += v[s + j * d] * k[j];
    out.push_back(acc);
  }
  return out;
}

}  // namespace

TEST(Dense, IdentityWeights) {
  Probe p(LayerSpec::dense(2, 2));
  p.set(0, {1, 0, 0, 1});
  p.set(1, {0, 0});
  EXPECT_EQ(flat(p.net.forward(row({1, 2}), Mode::Eval)), (std::vector<double>{1, 2}));
}

TEST(Dense, HandMultiply) {
  Probe p(LayerSpec::dense(2, 2));
  p.set(0, {1, 1, 0, 1});
  p.set(1, {1, 0});
  EXPECT_EQ(flat(p.net.forward(row({2, 3}), Mode::Eval)), (std::vector<double>{6, 3}));
}

TEST(Dense, WrongWidthIsShapeError) {
  Probe p(LayerSpec::dense(2, 2));
  EXPECT_THROW(p.net.forward(row({1, 2, 3}), Mode::Eval), ShapeError);
}

TEST(Conv1D, IdentityKernelPreservesInput) {
  Probe p(LayerSpec::conv1d(1, 1, 3, 1, Padding::ZeroSymmetric));
  p.set(0, {0, 1, 0});
  p.set(1, {0});
  const std::vector<double> v{0.3, -1.2, 4.0, 2.5, 0.0};
  EXPECT_EQ(flat(p.net.forward(row(v), Mode::Eval)), v);
}

TEST(Conv1D, ValidPaddingMatchesNaiveLoop) {
  Probe p(LayerSpec::conv1d(1, 1, 2, 1, Padding::None));
  p.set(0, {1, 1});
  p.set(1, {0});
  const auto got = flat(p.net.forward(row({1, 2, 3}), Mode::Eval));
  EXPECT_EQ(got, naive_conv({1, 2, 3}, {1, 1}, 1));
  EXPECT_EQ(got, (std::vector<double>{3, 5}));
}

TEST(Conv1D, DilationMatchesNaiveLoop) {
  Probe p(LayerSpec::conv1d(1, 1, 2, 2, Padding::None));
  p.set(0, {1, 1});
  p.set(1, {0});
  const auto got = flat(p.net.forward(row({1, 2, 3, 4}), Mode::Eval));
  EXPECT_EQ(got, naive_conv({1, 2, 3, 4}, {1, 1}, 2));
  EXPECT_EQ(got, (std::vector<double>{4, 6}));
}

TEST(Conv1D, OutputLengthsPerPaddingMode) {
  Conv1D none(LayerSpec::conv1d(1, 1, 3, 2, Padding::None));
  Conv1D sym(LayerSpec::conv1d(1, 1, 5, 1, Padding::ZeroSymmetric));
  Conv1D causal(LayerSpec::conv1d(1, 1, 3, 4, Padding::Causal));
  EXPECT_EQ(none.output_length(10), 10u - 4u);
  EXPECT_EQ(sym.output_length(10), 10u);
  EXPECT_EQ(causal.output_length(10), 10u);
  EXPECT_EQ(causal.left_pad(), 8u);
  EXPECT_EQ(causal.right_pad(), 0u);
  EXPECT_THROW(none.output_length(4), ShapeError);
}

TEST(Conv1D, EvenKernelWithSymmetricPaddingRejected) {
  EXPECT_THROW(LayerSpec::conv1d(1, 1, 4, 1, Padding::ZeroSymmetric).validate(), ConfigError);
  EXPECT_THROW(LayerSpec::conv1d(1, 1, 3, 0, Padding::None).validate(), ConfigError);
}

TEST(Conv1D, CausalOutputIgnoresFuture) {
  Sequential s;
  s.add(LayerSpec::conv1d(2, 3, 3, 2, Padding::Causal, true));
  Network net(std::move(s), 5);
  Batch x = testsupport::random_batch(1, 2, 9, 3);
  const Batch y = net.forward(x, Mode::Eval);
  for (std::size_t cut = 0; cut < 9; ++cut) {
    Batch xz = x;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t l = cut + 1; l < 9; ++l) xz.at(0, c, l) = 0.0;
    const Batch yz = net.forward(xz, Mode::Eval);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t l = 0; l <= cut; ++l) EXPECT_EQ(yz.at(0, c, l), y.at(0, c, l));
  }
}

TEST(Conv1D, IdentityKernelComposedIsIdentity) {
  Sequential s;
  for (int i = 0; i < 4; ++i) s.add(LayerSpec::conv1d(1, 1, 3, 1, Padding::ZeroSymmetric));
  Network net(std::move(s), 2);
  for (auto& b : net.params().blocks()) {
    auto v = net.params().values(&b - net.params().blocks().data());
    if (b.size == 3) {
      v[0] = 0; v[1] = 1; v[2] = 0;
    } else {
      v[0] = 0;
    }
  }
  Batch x = testsupport::random_batch(2, 1, 7, 11);
  EXPECT_EQ(net.forward(x, Mode::Eval), x);
}

TEST(LstmCell, ZeroWeightsGiveZeroState) {
  LstmCellParams p{3, 2, std::vector<double>(24, 0.0), std::vector<double>(16, 0.0), std::vector<double>(8, 0.0)};
  auto s = lstm_cell_step(std::vector<double>{1, -2, 3}, std::vector<double>{0.5, 0.1},
                          std::vector<double>{0, 0}, p);
  EXPECT_EQ(s.h, (std::vector<double>{0, 0}));
  EXPECT_EQ(s.c, (std::vector<double>{0, 0}));
}

TEST(LstmCell, SaturatedForgetGateKeepsCell) {
  LstmCellParams p{2, 2, std::vector<double>(16, 0.0), std::vector<double>(16, 0.0), std::vector<double>(8, 0.0)};
  p.bias[2] = p.bias[3] = 50.0;   // forget gate
  p.bias[0] = p.bias[1] = -50.0;  // input gate closed
  auto s = lstm_cell_step(std::vector<double>{0.4, -0.7}, std::vector<double>{0.2, 0.3},
                          std::vector<double>{0.8, -1.5}, p);
  EXPECT_NEAR(s.c[0], 0.8, 1e-12);
  EXPECT_NEAR(s.c[1], -1.5, 1e-12);
}

TEST(LstmCell, MatchesGateByGateOracle) {
  const std::size_t n = 3, h = 2;
  Rng rng(42);
  LstmCellParams p{n, h, {}, {}, {}};
  for (std::size_t i = 0; i < 4 * h * n; ++i) p.w_in.push_back(uniform(rng, -0.5, 0.5));
  for (std::size_t i = 0; i < 4 * h * h; ++i) p.w_rec.push_back(uniform(rng, -0.5, 0.5));
  for (std::size_t i = 0; i < 4 * h; ++i) p.bias.push_back(uniform(rng, -0.5, 0.5));
  const std::vector<double> x{0.3, -0.8, 1.1}, hp{0.2, -0.4}, cp{0.5, 0.9};

  auto F = [&](std::size_t gate, std::size_t j) {
    double s = p.bias[gate * h + j];
    for (std::size_t i = 0; i < n; ++i) s += p.w_in[(gate * h + j) * n + i] * x[i];
    for (std::size_t i = 0; i < h; ++i) s += p.w_rec[(gate * h + j) * h + i] * hp[i];
    return s;
  };
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  auto s = lstm_cell_step(x, hp, cp, p);
  for (std::size_t j = 0; j < h; ++j) {
    const double zin = sig(F(0, j));
    const double zfor = sig(F(1, j));
    const double c = zfor * cp[j] + zin * std::tanh(F(2, j));
    const double zout = sig(F(3, j));
    EXPECT_NEAR(s.c[j], c, 1e-14);
    EXPECT_NEAR(s.h[j], zout * std::tanh(c), 1e-14);
  }
}

TEST(LstmCell, LayerAgreesWithCellStep) {
  Sequential seq;
  seq.add(LayerSpec::lstm(3, 4));
  Network net(std::move(seq), 9);
  auto& store = net.params();
  LstmCellParams p{3, 4, {}, {}, {}};
  p.w_in.assign(store.values(0).begin(), store.values(0).end());
  p.w_rec.assign(store.values(1).begin(), store.values(1).end());
  p.bias.assign(store.values(2).begin(), store.values(2).end());
  Batch x = testsupport::random_batch(1, 3, 4, 8);
  Batch y = net.forward(x, Mode::Eval);
  LstmCellState st{std::vector<double>(4, 0.0), std::vector<double>(4, 0.0)};
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<double> xt{x.at(0, 0, t), x.at(0, 1, t), x.at(0, 2, t)};
    st = lstm_cell_step(xt, st.h, st.c, p);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y.at(0, j, t), st.h[j], 1e-14);
  }
}

TEST(Activation, ReferenceValues) {
  EXPECT_DOUBLE_EQ(activate(ActivationFn::Softplus, 0.0), std::numbers::ln2);
  EXPECT_EQ(activate(ActivationFn::Tanh, 0.0), 0.0);
  EXPECT_EQ(activate(ActivationFn::Sigmoid, 0.0), 0.5);
  EXPECT_NEAR(activate(ActivationFn::Swish, 1.0), 0.7310585786300049, 1e-15);
  EXPECT_EQ(activate(ActivationFn::LeakyRelu, -2.0), -0.02);
  EXPECT_EQ(activate(ActivationFn::Softplus, 800.0), 800.0);
  EXPECT_TRUE(std::isfinite(activate(ActivationFn::Softplus, -800.0)));
}

TEST(Activation, UnknownNameRejected) {
  EXPECT_THROW(activation_from_string("gelu"), ConfigError);
  EXPECT_EQ(activation_from_string("swish"), ActivationFn::Swish);
}

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  Probe p(LayerSpec::batch_norm(1));
  Batch x(3, 1, 2, 4.2);
  const Batch y = p.net.forward(x, Mode::Train);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, TwoSampleHandOracle) {
  Probe p(LayerSpec::batch_norm(1));
  Batch x(2, 1, 1);
  x.at(0, 0, 0) = -1.0;
  x.at(1, 0, 0) = 1.0;
  Batch y = p.net.forward(x, Mode::Train);
  const double expect = 1.0 / std::sqrt(1.0 + BatchNorm1D::kEpsilon);
  EXPECT_NEAR(y.at(0, 0, 0), -expect, 1e-15);
  EXPECT_NEAR(y.at(1, 0, 0), expect, 1e-15);
  // Running stats moved by one momentum step from (0, 1): mean 0, var 1.
  EXPECT_NEAR(p.net.params().buffer(0)[0], 0.0, 1e-15);
  EXPECT_NEAR(p.net.params().buffer(1)[0], 1.0, 1e-15);
}

TEST(BatchNorm, EvalWithUnitStatsIsAffine) {
  Probe p(LayerSpec::batch_norm(1));
  p.set(0, {2.0});
  p.set(1, {0.5});
  Batch x = row({0.1, -0.3, 2.0});
  Batch y = p.net.forward(x, Mode::Eval);
  const double s = 1.0 / std::sqrt(1.0 + BatchNorm1D::kEpsilon);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y.data()[i], 2.0 * x.data()[i] * s + 0.5, 1e-15);
}

TEST(BatchNorm, SingleSampleTrainIsConfigError) {
  Probe p(LayerSpec::batch_norm(1));
  EXPECT_THROW(p.net.forward(row({1, 2}), Mode::Train), ConfigError);
}

TEST(WeightNorm, ReparameterizationIdentities) {
  const std::vector<double> v{0.6, 0.8, 0.0, 3.0, 4.0, 0.0};
  EXPECT_EQ(weight_norm_apply(v, std::vector<double>{1.0, 5.0}), v);
  for (double w : weight_norm_apply(v, std::vector<double>{0.0, 0.0})) EXPECT_EQ(w, 0.0);
  EXPECT_THROW(weight_norm_apply(std::vector<double>{0, 0, 1, 1}, std::vector<double>{1, 1}),
               NumericError);
}

TEST(WeightNorm, FilterNormEqualsAbsGain) {
  Rng rng(3);
  std::vector<double> v(12), g(4);
  for (double& x : v) x = uniform(rng, -2, 2);
  for (double& x : g) x = uniform(rng, -3, 3);
  auto w = weight_norm_apply(v, g);
  for (std::size_t o = 0; o < 4; ++o) {
    double n = 0;
    for (std::size_t i = 0; i < 3; ++i) n += w[o * 3 + i] * w[o * 3 + i];
    EXPECT_NEAR(std::sqrt(n), std::abs(g[o]), 1e-14);
  }
}

TEST(Pooling, WindowAverageAndRepeat) {
  EXPECT_EQ(avg_pool1d(std::vector<double>{1, 3, 5, 7}, 2), (std::vector<double>{2, 6}));
  EXPECT_EQ(avg_pool1d(std::vector<double>{1, 3, 5, 7, 9}, 2), (std::vector<double>{2, 6, 9}));
  EXPECT_EQ(upsample1d(std::vector<double>{2, 6}, 2), (std::vector<double>{2, 2, 6, 6}));
  const std::vector<double> v{1.5, -2, 3};
  EXPECT_EQ(avg_pool1d(v, 1), v);
  EXPECT_EQ(upsample1d(v, 1), v);
  EXPECT_THROW(avg_pool1d(v, 0), ConfigError);
  EXPECT_THROW(LayerSpec::upsample(0).validate(), ConfigError);
}

TEST(Pooling, PoolThenUpsampleOnConstantIsIdentity) {
  for (std::size_t s = 1; s <= 4; ++s) {
    std::vector<double> v(12, 3.25);
    EXPECT_EQ(upsample1d(avg_pool1d(v, s), s), v);
  }
}

TEST(Backprop, DenseMseMatchesClosedForm) {
  Probe p(LayerSpec::dense(3, 2));
  Batch x = testsupport::random_batch(4, 1, 3, 1);
  Batch y = testsupport::random_batch(4, 1, 2, 2);
  auto& store = p.net.params();
  store.zero_grads();
  Batch pred = p.net.forward(x, Mode::Train);
  auto loss = mse_loss(pred, y);
  p.net.backward(loss.grad);
  // dL/dW = 2 (Wx + b - y) x^T / (n * out), summed over samples.
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t o = 0; o < 2; ++o)
    for (std::size_t i = 0; i < 3; ++i) {
      double expect = 0.0;
      for (std::size_t b = 0; b < 4; ++b) expect += scale * (pred.at(b, 0, o) - y.at(b, 0, o)) * x.at(b, 0, i);
      EXPECT_NEAR(store.grads(0)[o * 3 + i], expect, 1e-14);
    }
}

TEST(Backprop, ZeroSeedGivesZeroGradients) {
  auto c = testsupport::make_layer_case(8, 3);
  Network net(std::move(c.layers), 1);
  Batch y = net.forward(c.input, Mode::Train);
  net.params().zero_grads();
  net.backward(Batch(y.samples(), y.channels(), y.length()));
  for (double g : net.params().flat_grads()) EXPECT_EQ(g, 0.0);
}

TEST(Backprop, WithoutForwardIsStateError) {
  Probe p(LayerSpec::dense(2, 2));
  EXPECT_THROW(p.net.backward(row({1, 1})), StateError);
  Probe q(LayerSpec::conv1d(1, 1, 3));
  EXPECT_THROW(q.net.backward(row({1, 1})), StateError);
}

TEST(Backprop, FiniteDifferenceEveryLayerKind) {
  for (std::size_t i = 0; i < 2 * testsupport::kLayerCaseKinds; ++i) {
    auto c = testsupport::make_layer_case(i, 100);
    auto r = testsupport::gradient_check(std::move(c.layers), c.input, 1000 + i, c.mode);
    EXPECT_LT(r.worst(), 1e-5) << c.label;
  }
}

TEST(Adam, ZeroGradientIsBitIdenticalNoOp) {
  ParamStore store;
  auto b = store.add_block("w", 0, 5);
  Rng rng(1);
  for (double& v : store.values(b)) v = uniform(rng, -1, 1);
  const auto before = store.flat_values();
  AdamState st(store.size(), 0.1);
  for (int i = 0; i < 10; ++i) adam_step(store, st);
  EXPECT_EQ(store.flat_values(), before);
  EXPECT_EQ(st.step, 10u);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  ParamStore store;
  auto b = store.add_block("w", 0, 3);
  store.grads(b)[0] = 5.0;
  store.grads(b)[1] = -0.01;
  store.grads(b)[2] = 1e-3;
  AdamState st(store.size(), 0.01);
  adam_step(store, st);
  EXPECT_NEAR(store.values(b)[0], -0.01, 1e-9);
  EXPECT_NEAR(store.values(b)[1], 0.01, 1e-7);
  EXPECT_NEAR(store.values(b)[2], -0.01, 1e-6);
}

TEST(Adam, QuadraticTrajectoryMatchesScalarSimulation) {
  // f(theta) = theta^2, theta0 = 1, lr 0.1. Reference values from an
  // independent scalar simulation of the Adam recurrences.
  ParamStore store;
  auto b = store.add_block("theta", 0, 1);
  store.values(b)[0] = 1.0;
  AdamState st(1, 0.1);
  double prev = 1.0;
  for (int t = 1; t <= 100; ++t) {
    store.grads(b)[0] = 2.0 * store.values(b)[0];
    adam_step(store, st);
    if (t <= 10) {
      EXPECT_LT(store.values(b)[0], prev) << "step " << t;
    }
    prev = store.values(b)[0];
    if (t == 10) EXPECT_NEAR(prev, 0.07624915560691221, 1e-12);
  }
  EXPECT_NEAR(prev, 0.002936675681102549, 1e-12);
}

TEST(Adam, NonFiniteGradientAbortsWithLayer) {
  ParamStore store;
  store.add_block("a", 0, 2);
  auto b = store.add_block("b", 3, 2);
  store.grads(b)[1] = std::nan("");
  AdamState st(store.size(), 0.1);
  try {
    adam_step(store, st);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 3"), std::string::npos);
  }
  EXPECT_EQ(st.step, 0u);
}

TEST(Mse, Values) {
  EXPECT_EQ(mse_loss(row({1, 2}), row({1, 2})).value, 0.0);
  auto r = mse_loss(row({0, 0}), row({1, 3}));
  EXPECT_EQ(r.value, 5.0);
  EXPECT_EQ(flat(r.grad), (std::vector<double>{-1.0, -3.0}));
  EXPECT_THROW(mse_loss(row({0}), row({1, 3})), ShapeError);
}

TEST(Mse, GradientMatchesFiniteDifferences) {
  Batch p = testsupport::random_batch(2, 2, 3, 4), t = testsupport::random_batch(2, 2, 3, 5);
  auto r = mse_loss(p, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    Batch up = p, dn = p;
    up.data()[i] += 1e-6;
    dn.data()[i] -= 1e-6;
    const double fd = (mse_loss(up, t).value - mse_loss(dn, t).value) / 2e-6;
    EXPECT_NEAR(r.grad.data()[i], fd, 1e-8);
  }
}

TEST(Determinism, ForwardIsRepeatable) {
  auto c = testsupport::make_layer_case(5, 9);
  Network net(std::move(c.layers), 3);
  EXPECT_EQ(net.forward(c.input, Mode::Eval), net.forward(c.input, Mode::Eval));
}
