#pragma once

// Random small layer configurations (widths <= 8, batch <= 4) covering
// every layer kind, for gradient checking.

#include <memory>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace romf::testsupport {

struct LayerCase {
  std::string label;
  nn::Sequential layers;
  nn::Batch input;
  nn::Mode mode = nn::Mode::Train;
};

inline constexpr std::size_t kLayerCaseKinds = 9;

/// Case `i` cycles through the kinds; the remaining dimensions come from `seed`.
inline LayerCase make_layer_case(std::size_t i, std::uint64_t seed) {
  nn::Rng rng(seed * 7919 + i);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  };
  LayerCase c;
  const std::size_t batch = pick(2, 4);
  switch (i % kLayerCaseKinds) {
    case 0: {
      const std::size_t in = pick(1, 8), out = pick(1, 8);
      c.label = "dense " + std::to_string(in) + "->" + std::to_string(out);
      c.layers.add(nn::LayerSpec::dense(in, out));
      c.input = random_batch(batch, 1, in, seed + i);
      break;
    }
    case 1: {
      const std::size_t cin = pick(1, 4), cout = pick(1, 4);
      const std::size_t k = 2 * pick(0, 2) + 1;
      const std::size_t len = pick(k, 8);
      const bool wn = rng() % 2 == 0;
      c.label = "conv1d zero-symmetric k=" + std::to_string(k) + (wn ? " wn" : "");
      c.layers.add(nn::LayerSpec::conv1d(cin, cout, k, 1, nn::Padding::ZeroSymmetric, wn, true));
      c.input = random_batch(batch, cin, len, seed + i);
      break;
    }
    case 2: {
      const std::size_t cin = pick(1, 4), cout = pick(1, 4);
      const std::size_t k = pick(1, 3), d = pick(1, 3);
      const bool wn = rng() % 2 == 0;
      const bool bias = rng() % 2 == 0;
      c.label = "conv1d causal k=" + std::to_string(k) + " d=" + std::to_string(d) + (wn ? " wn" : "") +
                (bias ? "" : " nobias");
      c.layers.add(nn::LayerSpec::conv1d(cin, cout, k, d, nn::Padding::Causal, wn, bias));
      c.input = random_batch(batch, cin, pick(2, 8), seed + i);
      break;
    }
    case 3: {
      const std::size_t cin = pick(1, 3), cout = pick(1, 3);
      const std::size_t k = pick(1, 3), d = pick(1, 2);
      const std::size_t len = (k - 1) * d + pick(1, 4);
      c.label = "conv1d valid k=" + std::to_string(k) + " d=" + std::to_string(d);
      c.layers.add(nn::LayerSpec::conv1d(cin, cout, k, d, nn::Padding::None, rng() % 2 == 0, true));
      c.input = random_batch(batch, cin, len, seed + i);
      break;
    }
    case 4: {
      const std::size_t in = pick(1, 5), h = pick(1, 5), steps = pick(1, 5);
      c.label = "lstm " + std::to_string(in) + "->" + std::to_string(h) + " T=" + std::to_string(steps);
      c.layers.add(nn::LayerSpec::lstm(in, h));
      c.input = random_batch(batch, in, steps, seed + i);
      break;
    }
    case 5: {
      const std::size_t ch = pick(1, 4), len = pick(1, 6);
      const bool eval = rng() % 3 == 0;
      c.label = std::string("batch_norm ") + (eval ? "eval" : "train");
      c.layers.add(nn::LayerSpec::batch_norm(ch));
      // Follow with a nonlinearity so the scale/shift gradients are nontrivial.
      c.layers.add(nn::LayerSpec::activation(nn::ActivationFn::Tanh));
      c.input = random_batch(batch, ch, len, seed + i, -2.0, 2.0);
      c.mode = eval ? nn::Mode::Eval : nn::Mode::Train;
      break;
    }
    case 6: {
      const std::size_t ch = pick(1, 3), s = pick(1, 3), len = pick(1, 8);
      const bool pool = rng() % 2 == 0;
      c.label = std::string(pool ? "avg_pool" : "upsample") + " s=" + std::to_string(s) +
                " L=" + std::to_string(len);
      c.layers.add(nn::LayerSpec::conv1d(ch, ch, 1));
      c.layers.add(pool ? nn::LayerSpec::avg_pool(s) : nn::LayerSpec::upsample(s));
      c.input = random_batch(batch, ch, len, seed + i);
      break;
    }
    case 7: {
      const nn::ActivationFn fns[] = {nn::ActivationFn::Sigmoid, nn::ActivationFn::Tanh,
                                      nn::ActivationFn::Relu, nn::ActivationFn::LeakyRelu,
                                      nn::ActivationFn::Swish, nn::ActivationFn::Softplus};
      const auto fn = fns[rng() % 6];
      const std::size_t w = pick(1, 8);
      c.label = "activation " + std::string(nn::to_string(fn));
      c.layers.add(nn::LayerSpec::dense(w, w));
      c.layers.add(nn::LayerSpec::activation(fn));
      c.input = random_batch(batch, 1, w, seed + i, -3.0, 3.0);
      break;
    }
    default: {
      const std::size_t cin = pick(1, 3), ch = pick(1, 4), len = pick(3, 8);
      nn::Sequential branch;
      branch.add(nn::LayerSpec::conv1d(cin, ch, 3, 1, nn::Padding::ZeroSymmetric, true, true));
      branch.add(nn::LayerSpec::activation(nn::ActivationFn::LeakyRelu));
      std::unique_ptr<nn::Layer> shortcut;
      if (cin != ch) shortcut = nn::make_layer(nn::LayerSpec::conv1d(cin, ch, 1));
      c.label = "residual block " + std::to_string(cin) + "->" + std::to_string(ch) + " + head";
      c.layers.add(std::make_unique<nn::ResidualBlock>(std::move(branch), std::move(shortcut),
                                                       nn::ActivationFn::LeakyRelu));
      c.layers.add(std::make_unique<nn::LastStep>());
      c.layers.add(std::make_unique<nn::Reshape>(ch, 1));
      c.input = random_batch(batch, cin, len, seed + i);
      break;
    }
  }
  return c;
}

}  // namespace romf::testsupport
