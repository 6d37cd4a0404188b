#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "romf/nn/layers.hpp"
#include "romf/nn/param_store.hpp"
#include "romf/nn/tensor.hpp"

namespace romf::nn {

struct LossResult {
  double value = 0.0;
  Batch grad;
};

/// Mean of squared differences over every element; gradient 2(pred - target)/N.
LossResult mse_loss(const Batch& pred, const Batch& target);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t size, double learning_rate)
      : first_moment(size, 0.0), second_moment(size, 0.0), lr(learning_rate) {}
};

/// One bias-corrected Adam update from the gradients currently held in
/// `params`. Throws NumericError naming the offending layer when any
/// gradient is non-finite; parameters are left untouched in that case.
void adam_step(ParamStore& params, AdamState& state);

/// A layer stack bound to its own parameter store.
class Network {
 public:
  Network(Sequential layers, std::uint64_t seed);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  Batch forward(const Batch& x, Mode mode) { return layers_.forward(x, store_, mode); }
  Batch backward(const Batch& grad) { return layers_.backward(grad, store_); }

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  Sequential& layers() { return layers_; }
  std::string describe() const { return layers_.describe(); }

 private:
  Sequential layers_;
  ParamStore store_;
};

/// Inputs and targets with matching sample counts.
struct SupervisedSet {
  Batch inputs;
  Batch targets;
  std::size_t size() const { return inputs.samples(); }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

using LossFn = std::function<LossResult(const Batch& pred, const Batch& target)>;

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  /// Learning rate decays along a cosine from lr to lr * lr_final_fraction.
  /// 1.0 keeps it constant.
  double lr_final_fraction = 1.0;
  std::uint64_t seed = 0;
  /// Echoed in error messages so a diverged run can be reproduced.
  std::string context;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Minibatch Adam training with a seeded per-epoch shuffle. Returns the
/// history and leaves `net` holding the parameters (and buffers) from the
/// epoch with the lowest validation loss; with an empty validation set the
/// training loss is used instead. A non-finite loss aborts with NumericError.
TrainHistory fit(Network& net, const SupervisedSet& train, const SupervisedSet& validation,
                 const LossFn& loss, const TrainOptions& options);

/// Forward pass in eval mode over `inputs` in chunks of `chunk` samples.
Batch predict(Network& net, const Batch& inputs, std::size_t chunk = 64);

}  // namespace romf::nn
