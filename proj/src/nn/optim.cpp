#include "romf/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "romf/error.hpp"

namespace romf::nn {

LossResult mse_loss(const Batch& pred, const Batch& target) {
  if (!pred.same_shape(target)) {
    throw ShapeError("mse_loss: prediction " + pred.shape_string() + " vs target " +
                     target.shape_string());
  }
  LossResult r{0.0, Batch(pred.samples(), pred.channels(), pred.length())};
  const auto p = pred.data();
  const auto t = target.data();
  auto g = r.grad.data();
  const double n = static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    r.value += d * d;
    g[i] = 2.0 * d / n;
  }
  r.value /= n;
  return r;
}

void adam_step(ParamStore& params, AdamState& state) {
  auto& grads = params.flat_grads();
  auto& values = params.flat_values();
  if (state.first_moment.size() != values.size()) {
    throw StateError("adam_step: optimizer state sized for " +
                     std::to_string(state.first_moment.size()) + " parameters, store has " +
                     std::to_string(values.size()));
  }
  for (const auto& block : params.blocks()) {
    double sq = 0.0;
    bool finite = true;
    for (std::size_t i = block.offset; i < block.offset + block.size; ++i) {
      if (!std::isfinite(grads[i])) finite = false;
      sq += grads[i] * grads[i];
    }
    if (!finite) {
      throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(block.layer) +
                         " block '" + block.name + "' (norm " + std::to_string(std::sqrt(sq)) + ")");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grads[i];
    state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
    state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.first_moment[i] / c1;
    const double v_hat = state.second_moment[i] / c2;
    values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

Network::Network(Sequential layers, std::uint64_t seed) : layers_(std::move(layers)), store_(seed) {
  Rng rng(seed);
  layers_.bind(store_, rng, 0);
}

Batch predict(Network& net, const Batch& inputs, std::size_t chunk) {
  if (inputs.samples() == 0) return {};
  Batch out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < inputs.samples(); start += chunk) {
    const std::size_t stop = std::min(start + chunk, inputs.samples());
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    Batch y = net.forward(inputs.gather(idx), Mode::Eval);
    if (start == 0) out = Batch(inputs.samples(), y.channels(), y.length());
    std::copy(y.data().begin(), y.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * y.features()));
  }
  return out;
}

namespace {

double evaluate_loss(Network& net, const SupervisedSet& set, const LossFn& loss) {
  Batch pred = predict(net, set.inputs);
  return loss(pred, set.targets).value;
}

}  // namespace

TrainHistory fit(Network& net, const SupervisedSet& train, const SupervisedSet& validation,
                 const LossFn& loss, const TrainOptions& options) {
  if (train.size() == 0) throw ConfigError("fit: empty training set" + options.context);
  if (train.targets.samples() != train.size() || validation.targets.samples() != validation.size()) {
    throw ShapeError("fit: input/target sample counts differ");
  }
  if (options.batch_size < 1) throw ConfigError("fit: batch size must be >= 1");

  ParamStore& store = net.params();
  AdamState adam(store.size(), options.lr);
  Rng shuffle_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory history;
  std::vector<double> best_values = store.flat_values();
  std::vector<double> best_buffers = store.flat_buffers();
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    if (options.lr_final_fraction != 1.0 && options.epochs > 1) {
      const double progress = static_cast<double>(epoch - 1) / static_cast<double>(options.epochs - 1);
      const double f = options.lr_final_fraction +
                       (1.0 - options.lr_final_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
      adam.lr = options.lr * f;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
      std::size_t stop = std::min(start + options.batch_size, order.size());
      // Fold a trailing singleton into the previous batch so batch-norm
      // always sees at least two samples.
      if (order.size() - stop == 1) stop = order.size();
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      Batch x = train.inputs.gather(idx);
      Batch y = train.targets.gather(idx);
      store.zero_grads();
      Batch pred = net.forward(x, Mode::Train);
      LossResult r = loss(pred, y);
      if (!std::isfinite(r.value)) {
        throw NumericError("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                           ", seed " + std::to_string(options.seed) + options.context);
      }
      net.backward(r.grad);
      adam_step(store, adam);
      total += r.value * static_cast<double>(idx.size());
      start = stop;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(order.size());
    rec.val_loss = validation.size() > 0 ? evaluate_loss(net, validation, loss) : rec.train_loss;
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("validation loss became non-finite at epoch " + std::to_string(epoch) +
                         ", seed " + std::to_string(options.seed) + options.context);
    }
    if (rec.val_loss < best) {
      best = rec.val_loss;
      history.best_epoch = epoch;
      best_values = store.flat_values();
      best_buffers = store.flat_buffers();
    }
    history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  store.flat_values() = best_values;
  store.flat_buffers() = best_buffers;
  history.best_val_loss = best;
  return history;
}

}  // namespace romf::nn
