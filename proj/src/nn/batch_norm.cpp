#include <cmath>

#include "romf/error.hpp"
#include "romf/nn/layers.hpp"

namespace romf::nn {

BatchNorm1D::BatchNorm1D(const LayerSpec& spec) : spec_(spec) { spec_.validate(); }

void BatchNorm1D::bind(ParamStore& store, Rng&, std::size_t index) {
  index_ = index;
  const std::string p = "layer" + std::to_string(index) + ".bn.";
  scale_ = store.add_block(p + "scale", index, spec_.in);
  shift_ = store.add_block(p + "shift", index, spec_.in);
  for (double& v : store.values(scale_)) v = 1.0;
  running_mean_ = store.add_buffer(p + "running_mean", index, spec_.in, 0.0);
  running_var_ = store.add_buffer(p + "running_var", index, spec_.in, 1.0);
}

Batch BatchNorm1D::forward(const Batch& x, ParamStore& store, Mode mode) {
  const std::size_t C = spec_.in;
  if (x.channels() != C) {
    throw ShapeError("batch_norm: input has " + std::to_string(x.channels()) +
                     " channels, expected " + std::to_string(C));
  }
  if (mode == Mode::Train && x.samples() < 2) {
    throw ConfigError("batch_norm: train mode needs a batch of at least 2 samples");
  }
  const std::size_t B = x.samples();
  const std::size_t L = x.length();
  auto gamma = store.values(scale_);
  auto beta = store.values(shift_);
  auto rmean = store.buffer(running_mean_);
  auto rvar = store.buffer(running_var_);

  Tape tape;
  tape.mode = mode;
  tape.normalized = Batch(B, C, L);
  tape.inv_std.assign(C, 0.0);
  Batch out(B, C, L);
  const double count = static_cast<double>(B * L);
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0;
    double var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t l = 0; l < L; ++l) mean += x.at(b, c, l);
      mean /= count;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t l = 0; l < L; ++l) {
          const double dev = x.at(b, c, l) - mean;
          var += dev * dev;
        }
      var /= count;
      rmean[c] = (1.0 - kMomentum) * rmean[c] + kMomentum * mean;
      rvar[c] = (1.0 - kMomentum) * rvar[c] + kMomentum * var;
    } else {
      mean = rmean[c];
      var = rvar[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + kEpsilon);
    tape.inv_std[c] = inv_std;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t l = 0; l < L; ++l) {
        const double xn = (x.at(b, c, l) - mean) * inv_std;
        tape.normalized.at(b, c, l) = xn;
        out.at(b, c, l) = gamma[c] * xn + beta[c];
      }
  }
  tape_ = std::move(tape);
  return out;
}

Batch BatchNorm1D::backward(const Batch& g, ParamStore& store) {
  require_tape(tape_.has_value());
  Tape tape = std::move(*tape_);
  tape_.reset();
  const Batch& xn = tape.normalized;
  if (!g.same_shape(xn)) throw ShapeError("batch_norm backward: gradient shape mismatch");
  const std::size_t B = g.samples();
  const std::size_t C = g.channels();
  const std::size_t L = g.length();
  auto gamma = store.values(scale_);
  auto dgamma = store.grads(scale_);
  auto dbeta = store.grads(shift_);
  Batch dx(B, C, L);
  const double count = static_cast<double>(B * L);
  for (std::size_t c = 0; c < C; ++c) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t l = 0; l < L; ++l) {
        sum_g += g.at(b, c, l);
        sum_gx += g.at(b, c, l) * xn.at(b, c, l);
      }
    dgamma[c] += sum_gx;
    dbeta[c] += sum_g;
    const double k = gamma[c] * tape.inv_std[c];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t l = 0; l < L; ++l) {
        if (tape.mode == Mode::Train) {
          dx.at(b, c, l) = k * (g.at(b, c, l) - sum_g / count - xn.at(b, c, l) * sum_gx / count);
        } else {
          dx.at(b, c, l) = k * g.at(b, c, l);
        }
      }
  }
  return dx;
}

std::string BatchNorm1D::describe() const { return "BatchNorm1D(" + std::to_string(spec_.in) + ")"; }

}  // namespace romf::nn
