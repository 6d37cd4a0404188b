#include "romf/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "romf/checkpoint.hpp"
#include "romf/config_reader.hpp"
#include "romf/error.hpp"
#include "romf/evalmetrics.hpp"
#include "romf/nn/activation.hpp"

namespace romf::fc {

using nn::ActivationFn;
using nn::LayerSpec;
using nn::Padding;

std::string to_string(ForecasterType t) {
  switch (t) {
    case ForecasterType::Cnn: return "cnn";
    case ForecasterType::Lstm: return "lstm";
    case ForecasterType::TcnTemporal: return "tcn_temporal";
    case ForecasterType::TcnSpatial: return "tcn_spatial";
  }
  return "cnn";
}

ForecasterType forecaster_type_from_string(const std::string& s) {
  for (auto t : {ForecasterType::Cnn, ForecasterType::Lstm, ForecasterType::TcnTemporal,
                 ForecasterType::TcnSpatial}) {
    if (to_string(t) == s) return t;
  }
  throw ConfigError("forecaster.type must be one of cnn, lstm, tcn_temporal, tcn_spatial; got '" +
                    s + "'");
}

std::size_t ForecasterSpec::locality_radius() const {
  // Two convolutions per residual block, each reaching (k-1)/2 per side.
  return blocks.size() * (kernel - 1);
}

void ForecasterSpec::validate() const {
  if (latent < 1) throw ConfigError("forecaster.latent must be >= 1");
  if (lookback < 1) throw ConfigError("forecaster.lookback must be >= 1");
  if (type == ForecasterType::Lstm) {
    if (lstm_layers < 1) throw ConfigError("forecaster.lstm_layers must be >= 1");
    return;
  }
  if (blocks.empty()) throw ConfigError("forecaster.blocks must list at least one block");
  for (auto c : blocks)
    if (c < 1) throw ConfigError("forecaster.blocks: channel counts must be >= 1");
  if (kernel < 1) throw ConfigError("forecaster.kernel must be >= 1");
  if (type == ForecasterType::Cnn && kernel % 2 == 0) {
    throw ConfigError("forecaster.kernel must be odd for zero-symmetric padding");
  }
}

void to_json(nlohmann::json& j, const ForecasterSpec& s) {
  j = {{"type", to_string(s.type)}, {"latent", s.latent},       {"lookback", s.lookback},
       {"dual_head", s.dual_head},  {"bias", s.bias},           {"increment", s.increment}};
  if (s.type == ForecasterType::Lstm) {
    j["lstm_layers"] = s.lstm_layers;
  } else {
    j["blocks"] = s.blocks;
    j["kernel"] = s.kernel;
  }
}

void from_json(const nlohmann::json& j, ForecasterSpec& s) {
  ConfigReader r(j, "forecaster");
  std::string type = to_string(s.type);
  r.read("type", type);
  s.type = forecaster_type_from_string(type);
  r.read("latent", s.latent).read("lookback", s.lookback).read("dual_head", s.dual_head);
  r.read("bias", s.bias).read("increment", s.increment);
  if (s.type == ForecasterType::Lstm) {
    r.read("lstm_layers", s.lstm_layers);
  } else {
    r.read("blocks", s.blocks).read("kernel", s.kernel);
  }
  r.finish();
  s.validate();
}

namespace {

nn::Sequential conv_stack(const ForecasterSpec& spec, std::size_t in_channels, Padding pad,
                          bool dilate) {
  nn::Sequential s;
  std::size_t c_in = in_channels;
  for (std::size_t l = 0; l < spec.blocks.size(); ++l) {
    const std::size_t ch = spec.blocks[l];
    const std::size_t d = dilate ? (std::size_t{1} << l) : 1;
    nn::Sequential branch;
    branch.add(LayerSpec::conv1d(c_in, ch, spec.kernel, d, pad, true, spec.bias));
    branch.add(LayerSpec::activation(ActivationFn::LeakyRelu));
    branch.add(LayerSpec::conv1d(ch, ch, spec.kernel, d, pad, true, spec.bias));
    branch.add(LayerSpec::activation(ActivationFn::LeakyRelu));
    std::unique_ptr<nn::Layer> shortcut;
    if (c_in != ch) shortcut = nn::make_layer(LayerSpec::conv1d(c_in, ch, 1, 1, Padding::None, false, spec.bias));
    s.add(std::make_unique<nn::ResidualBlock>(std::move(branch), std::move(shortcut),
                                              ActivationFn::LeakyRelu));
    c_in = ch;
  }
  return s;
}

bool transposed_layout(ForecasterType t) {
  return t == ForecasterType::Cnn || t == ForecasterType::TcnSpatial;
}

}  // namespace

nn::Sequential build_forecaster(const ForecasterSpec& spec) {
  spec.validate();
  const std::size_t m = spec.latent;
  const std::size_t heads = spec.heads();
  nn::Sequential net;
  switch (spec.type) {
    case ForecasterType::Cnn:
    case ForecasterType::TcnSpatial: {
      const bool cnn = spec.type == ForecasterType::Cnn;
      net.add(std::make_unique<nn::Sequential>(
          conv_stack(spec, spec.lookback, cnn ? Padding::ZeroSymmetric : Padding::Causal, !cnn)));
      net.add(LayerSpec::conv1d(spec.blocks.back(), heads, 1, 1, Padding::None, false, spec.bias));
      break;
    }
    case ForecasterType::TcnTemporal: {
      net.add(std::make_unique<nn::Sequential>(conv_stack(spec, m, Padding::Causal, true)));
      net.add(LayerSpec::conv1d(spec.blocks.back(), heads * m, 1, 1, Padding::None, false, spec.bias));
      net.add(std::make_unique<nn::LastStep>());
      net.add(std::make_unique<nn::Reshape>(heads, m));
      break;
    }
    case ForecasterType::Lstm: {
      for (std::size_t l = 0; l < spec.lstm_layers; ++l) net.add(LayerSpec::lstm(m, m));
      net.add(std::make_unique<nn::LastStep>());
      net.add(LayerSpec::dense(m, heads * m));
      net.add(std::make_unique<nn::Reshape>(heads, m));
      break;
    }
  }
  net.add(std::make_unique<nn::Activation>(ActivationFn::Tanh, 0, 1));
  return net;
}

void pack_window(const ForecasterSpec& spec, const nn::Tensor2& latents, std::size_t start,
                 nn::Batch& out, std::size_t b) {
  const std::size_t m = spec.latent, nt = spec.lookback;
  if (latents.rows() != m) {
    throw ShapeError("forecaster expects latent dimension " + std::to_string(m) + ", got " +
                     std::to_string(latents.rows()));
  }
  if (start + nt > latents.cols()) throw ShapeError("window runs past the end of the series");
  if (transposed_layout(spec.type)) {
    for (std::size_t t = 0; t < nt; ++t)
      for (std::size_t i = 0; i < m; ++i) out.at(b, t, i) = latents(i, start + t);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t t = 0; t < nt; ++t) out.at(b, i, t) = latents(i, start + t);
  }
}

namespace {
nn::Batch empty_inputs(const ForecasterSpec& spec, std::size_t samples) {
  return transposed_layout(spec.type) ? nn::Batch(samples, spec.lookback, spec.latent)
                                      : nn::Batch(samples, spec.latent, spec.lookback);
}
}  // namespace

nn::Batch pack_windows(const ForecasterSpec& spec, const nn::Tensor2& latents,
                       const data::WindowedDataset& windows) {
  if (windows.lookback != spec.lookback) {
    throw ConfigError("window lookback " + std::to_string(windows.lookback) +
                      " differs from forecaster lookback " + std::to_string(spec.lookback));
  }
  nn::Batch x = empty_inputs(spec, windows.size());
  for (std::size_t b = 0; b < windows.size(); ++b) pack_window(spec, latents, windows.starts[b], x, b);
  return x;
}

nn::Batch pack_targets(const nn::Tensor2& latents, const data::WindowedDataset& windows) {
  nn::Batch y(windows.size(), 1, latents.rows());
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const std::size_t col = windows.starts[b] + windows.lookback;
    if (col >= latents.cols()) throw ShapeError("window target past the end of the series");
    for (std::size_t i = 0; i < latents.rows(); ++i) y.at(b, 0, i) = latents(i, col);
  }
  return y;
}

Forecaster::Forecaster(ForecasterSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed), net_(build_forecaster(spec_), seed) {}

nn::Batch pack_targets(const ForecasterSpec& spec, const nn::Tensor2& latents,
                       const data::WindowedDataset& windows, double scale) {
  nn::Batch y = pack_targets(latents, windows);
  if (!spec.increment) return y;
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const std::size_t last = windows.starts[b] + windows.lookback - 1;
    for (std::size_t i = 0; i < latents.rows(); ++i) y.at(b, 0, i) = (y.at(b, 0, i) - latents(i, last)) / scale;
  }
  return y;
}

double increment_scale(const nn::Tensor2& latents, const data::WindowedDataset& windows) {
  double s = 0.0;
  for (std::size_t start : windows.starts) {
    const std::size_t last = start + windows.lookback - 1;
    if (last + 1 >= latents.cols()) throw ShapeError("window target past the end of the series");
    for (std::size_t i = 0; i < latents.rows(); ++i) s = std::max(s, std::abs(latents(i, last + 1) - latents(i, last)));
  }
  if (!(s > 0.0)) throw NumericError("training latents never change; increment scale is zero");
  return s;
}

void Forecaster::predict(const nn::Tensor2& window, std::vector<double>& mean,
                         std::vector<double>& var) {
  if (window.rows() != spec_.latent || window.cols() != spec_.lookback) {
    throw ShapeError("forecaster window must be " + std::to_string(spec_.latent) + "x" +
                     std::to_string(spec_.lookback) + ", got " + std::to_string(window.rows()) +
                     "x" + std::to_string(window.cols()));
  }
  nn::Batch x = empty_inputs(spec_, 1);
  pack_window(spec_, window, 0, x, 0);
  const nn::Batch y = net_.forward(x, nn::Mode::Eval);
  const std::size_t m = spec_.latent;
  const double s = output_scale_;
  mean.resize(m);
  for (std::size_t i = 0; i < m; ++i) mean[i] = (spec_.increment ? window(i, spec_.lookback - 1) : 0.0) + s * y.at(0, 0, i);
  var.clear();
  if (spec_.dual_head) {
    var.resize(m);
    for (std::size_t i = 0; i < m; ++i) var[i] = s * s * (nn::softplus(y.at(0, 1, i)) + 1e-6);
  }
}

std::vector<double> Forecaster::predict(const nn::Tensor2& window) {
  std::vector<double> mean, var;
  predict(window, mean, var);
  return mean;
}

void Forecaster::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json header = {{"model", "forecaster"},
                           {"spec", spec_},
                           {"seed", seed_},
                           {"output_scale", output_scale_},
                           {"history", history_to_json(history_)}};
  if (!extra.is_null()) header["extra"] = extra;
  save_checkpoint(path, header, net_.params());
}

Forecaster Forecaster::load(const std::filesystem::path& path, const ForecasterSpec* expected) {
  const Checkpoint c = load_checkpoint(path);
  if (c.header.value("model", "") != "forecaster") {
    throw IoError(path.string() + ": not a forecaster checkpoint");
  }
  if (expected) check_spec(c, nlohmann::json(*expected), path.string());
  Forecaster f(c.header.at("spec").get<ForecasterSpec>(), c.header.at("seed").get<std::uint64_t>());
  restore_params(c, f.net_.params());
  f.output_scale_ = c.header.at("output_scale").get<double>();
  f.history_ = history_from_json(c.header.at("history"));
  return f;
}

Forecaster train_forecaster(const nn::Tensor2& latents, const data::WindowSplits& windows,
                            const ForecasterSpec& spec, const TrainParams& params,
                            const nn::LossFn& loss,
                            std::function<void(const nn::EpochRecord&)> on_epoch) {
  params.validate("forecaster.train");
  if (spec.dual_head && !loss) throw ConfigError("dual-head forecasters need an explicit loss");
  Forecaster model(spec, params.seed);
  const double scale = spec.increment ? increment_scale(latents, windows.train) : 1.0;
  model.set_output_scale(scale);
  nn::SupervisedSet train{pack_windows(spec, latents, windows.train),
                          pack_targets(spec, latents, windows.train, scale)};
  nn::SupervisedSet val{pack_windows(spec, latents, windows.validation),
                        pack_targets(spec, latents, windows.validation, scale)};
  nn::TrainOptions opts = params.options();
  opts.context = " (forecaster " + nlohmann::json(spec).dump() + ")";
  opts.on_epoch = std::move(on_epoch);
  model.set_history(nn::fit(model.network(), train, val, loss ? loss : nn::LossFn(nn::mse_loss), opts));
  return model;
}

RolloutResult autoregressive_rollout(const StepFn& step, const nn::Tensor2& seed_window,
                                     std::size_t steps, const DecodeFn& decode,
                                     const nn::Tensor2* truth) {
  const std::size_t m = seed_window.rows();
  const std::size_t nt = seed_window.cols();
  if (m == 0 || nt == 0) throw ShapeError("rollout needs a non-empty seed window");
  if (truth && truth->cols() < steps) {
    throw ShapeError("rollout truth has " + std::to_string(truth->cols()) + " steps, need " +
                     std::to_string(steps));
  }
  nn::Tensor2 history(m, nt + steps);
  for (std::size_t t = 0; t < nt; ++t) history.set_column(t, seed_window.column(t));
  RolloutResult r;
  std::size_t produced = 0;
  for (std::size_t j = 0; j < steps; ++j) {
    const std::vector<double> next = step(history.columns(j, nt));
    if (next.size() != m) throw ShapeError("rollout step returned a vector of the wrong length");
    bool finite = true;
    for (double v : next) finite = finite && std::isfinite(v);
    if (!finite) {
      r.truncated_at = j;
      break;
    }
    history.set_column(nt + j, next);
    ++produced;
  }
  r.latent = history.columns(nt, produced);
  if (decode && produced > 0) {
    r.expanded = decode(r.latent);
    if (truth) {
      if (truth->rows() != r.expanded.rows()) {
        throw ShapeError("rollout truth has " + std::to_string(truth->rows()) +
                         " nodes, decoder produces " + std::to_string(r.expanded.rows()));
      }
      r.step_error = metrics::error_curve(truth->columns(0, produced), r.expanded);
    }
  }
  return r;
}

}  // namespace romf::fc
