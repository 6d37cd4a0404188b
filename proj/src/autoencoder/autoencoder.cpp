#include "romf/autoencoder.hpp"

#include <algorithm>
#include <numeric>

#include "romf/checkpoint.hpp"
#include "romf/config_reader.hpp"
#include "romf/error.hpp"
#include "romf/log.hpp"

namespace romf::ae {

using nn::LayerSpec;
using nn::Padding;

std::size_t AutoencoderSpec::latent_dim() const {
  if (type == "mlp") return latent;
  std::size_t div = 1;
  for (const auto& s : stages) div *= s.stride;
  return div == 0 ? 0 : nodes / div;
}

void AutoencoderSpec::validate() const {
  if (nodes < 2) throw ConfigError("autoencoder.nodes must be >= 2");
  if (type == "cae") {
    if (stages.empty()) throw ConfigError("autoencoder.stages must not be empty");
    std::size_t div = 1;
    for (const auto& s : stages) {
      if (s.channels < 1) throw ConfigError("autoencoder.stages: channels must be >= 1");
      if (s.stride < 1) throw ConfigError("autoencoder.stages: stride must be >= 1");
      div *= s.stride;
    }
    if (nodes % div != 0) {
      throw ConfigError("autoencoder.stages: product of strides (" + std::to_string(div) +
                        ") must divide nodes (" + std::to_string(nodes) + ")");
    }
    if (kernel % 2 == 0) throw ConfigError("autoencoder.kernel must be odd");
  } else if (type == "mlp") {
    if (latent < 1) throw ConfigError("autoencoder.latent must be >= 1");
    for (auto w : hidden)
      if (w < 1) throw ConfigError("autoencoder.hidden widths must be >= 1");
  } else {
    throw ConfigError("autoencoder.type must be 'cae' or 'mlp', got '" + type + "'");
  }
  if (latent_dim() >= nodes) throw ConfigError("autoencoder latent dimension must be < nodes");
}

AutoencoderSpec AutoencoderSpec::cae_default(const data::ProblemConfig& problem) {
  AutoencoderSpec s;
  s.type = "cae";
  s.nodes = problem.nodes();
  if (problem.kind == "stoker") s.stages = {{8, 2}, {32, 2}, {32, 2}};
  return s;
}

AutoencoderSpec AutoencoderSpec::mlp_default(const data::ProblemConfig& problem, std::size_t latent) {
  AutoencoderSpec s;
  s.type = "mlp";
  s.nodes = problem.nodes();
  s.hidden = problem.kind == "stoker" ? std::vector<std::size_t>{500, 250}
                                      : std::vector<std::size_t>{100, 50};
  s.latent = latent;
  s.activation = nn::ActivationFn::Relu;
  return s;
}

void to_json(nlohmann::json& j, const AutoencoderSpec& s) {
  j = {{"type", s.type}, {"nodes", s.nodes}, {"activation", nn::to_string(s.activation)}};
  if (s.type == "cae") {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : s.stages) stages.push_back({st.channels, st.stride});
    j["stages"] = stages;
    j["kernel"] = s.kernel;
  } else {
    j["hidden"] = s.hidden;
    j["latent"] = s.latent;
  }
}

void from_json(const nlohmann::json& j, AutoencoderSpec& s) {
  ConfigReader r(j, "autoencoder");
  r.read("type", s.type).read("nodes", s.nodes);
  if (s.type == "mlp") {
    s.activation = nn::ActivationFn::Relu;
    r.read("hidden", s.hidden).read("latent", s.latent);
  } else {
    r.read("kernel", s.kernel);
    if (r.has("stages")) {
      s.stages.clear();
      for (const auto& st : r.at("stages")) {
        if (!st.is_array() || st.size() != 2) {
          throw ConfigError("autoencoder.stages: each stage is [channels, stride]");
        }
        s.stages.push_back({st[0].get<std::size_t>(), st[1].get<std::size_t>()});
      }
    }
  }
  std::string act(nn::to_string(s.activation));
  r.read("activation", act);
  s.activation = nn::activation_from_string(act);
  r.finish();
  s.validate();
}

nn::Sequential build_autoencoder(const AutoencoderSpec& spec) {
  spec.validate();
  nn::Sequential encoder, decoder;
  const auto act = LayerSpec::activation(spec.activation);
  if (spec.type == "cae") {
    const std::size_t k = spec.kernel;
    std::size_t c_in = 1;
    for (const auto& st : spec.stages) {
      encoder.add(LayerSpec::conv1d(c_in, st.channels, k, 1, Padding::ZeroSymmetric));
      encoder.add(LayerSpec::batch_norm(st.channels));
      encoder.add(act);
      encoder.add(LayerSpec::avg_pool(st.stride));
      c_in = st.channels;
    }
    encoder.add(LayerSpec::conv1d(c_in, 1, 1));
    encoder.add(LayerSpec::activation(nn::ActivationFn::Sigmoid));

    decoder.add(LayerSpec::conv1d(1, c_in, 1));
    decoder.add(LayerSpec::batch_norm(c_in));
    decoder.add(act);
    for (auto it = spec.stages.rbegin(); it != spec.stages.rend(); ++it) {
      decoder.add(LayerSpec::upsample(it->stride));
      decoder.add(LayerSpec::conv1d(c_in, it->channels, k, 1, Padding::ZeroSymmetric));
      decoder.add(LayerSpec::batch_norm(it->channels));
      decoder.add(act);
      c_in = it->channels;
    }
    decoder.add(LayerSpec::conv1d(c_in, 1, k, 1, Padding::ZeroSymmetric));
    decoder.add(LayerSpec::activation(nn::ActivationFn::Sigmoid));
  } else {
    std::vector<std::size_t> widths{spec.nodes};
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.latent);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      encoder.add(LayerSpec::dense(widths[i], widths[i + 1]));
      encoder.add(i + 2 < widths.size() ? act : LayerSpec::activation(nn::ActivationFn::Sigmoid));
    }
    for (std::size_t i = widths.size() - 1; i > 0; --i) {
      decoder.add(LayerSpec::dense(widths[i], widths[i - 1]));
      decoder.add(i > 1 ? act : LayerSpec::activation(nn::ActivationFn::Sigmoid));
    }
  }
  nn::Sequential model;
  model.add(std::make_unique<nn::Sequential>(std::move(encoder)));
  model.add(std::make_unique<nn::Sequential>(std::move(decoder)));
  return model;
}

TrainedAutoencoder::TrainedAutoencoder(AutoencoderSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed), net_(build_autoencoder(spec_), seed) {}

nn::Batch TrainedAutoencoder::run_half(std::size_t half, const nn::Batch& x) {
  constexpr std::size_t chunk = 64;
  auto& layer = net_.layers().at(half);
  if (x.samples() <= chunk) return layer.forward(x, net_.params(), nn::Mode::Eval);
  nn::Batch out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.samples(); start += chunk) {
    const std::size_t stop = std::min(start + chunk, x.samples());
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    nn::Batch y = layer.forward(x.gather(idx), net_.params(), nn::Mode::Eval);
    if (start == 0) out = nn::Batch(x.samples(), y.channels(), y.length());
    std::copy(y.data().begin(), y.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(start * y.features()));
  }
  return out;
}

nn::Batch columns_to_batch(const nn::Tensor2& scaled, std::span<const std::size_t> columns) {
  nn::Batch b(columns.size(), 1, scaled.rows());
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] >= scaled.cols()) throw ShapeError("column index out of range");
    for (std::size_t r = 0; r < scaled.rows(); ++r) b.at(i, 0, r) = scaled(r, columns[i]);
  }
  return b;
}

namespace {

nn::Batch all_columns(const nn::Tensor2& m) {
  std::vector<std::size_t> idx(m.cols());
  std::iota(idx.begin(), idx.end(), 0);
  return columns_to_batch(m, idx);
}

nn::Tensor2 batch_to_columns(const nn::Batch& b) {
  nn::Tensor2 m(b.features(), b.samples());
  for (std::size_t s = 0; s < b.samples(); ++s) m.set_column(s, b.sample(s));
  return m;
}

}  // namespace

nn::Tensor2 TrainedAutoencoder::encode(const nn::Tensor2& columns) {
  if (columns.rows() != spec_.nodes) {
    throw ShapeError("encode: input has " + std::to_string(columns.rows()) + " rows, expected " +
                     std::to_string(spec_.nodes));
  }
  const auto [lo, hi] = std::minmax_element(columns.data().begin(), columns.data().end());
  if (columns.size() > 0 && (*lo < -0.5 || *hi > 1.5)) {
    warn("encode: input range [" + std::to_string(*lo) + ", " + std::to_string(*hi) +
         "] is far outside [0, 1]; was the scaler applied?");
  }
  return batch_to_columns(run_half(0, all_columns(columns)));
}

nn::Tensor2 TrainedAutoencoder::decode(const nn::Tensor2& latents) {
  if (latents.rows() != latent_dim()) {
    throw ShapeError("decode: latent has " + std::to_string(latents.rows()) + " rows, expected " +
                     std::to_string(latent_dim()));
  }
  return batch_to_columns(run_half(1, all_columns(latents)));
}

std::vector<double> TrainedAutoencoder::encode(std::span<const double> v) {
  const nn::Tensor2 z = encode(nn::Tensor2(v.size(), 1, std::vector<double>(v.begin(), v.end())));
  return z.column(0);
}

std::vector<double> TrainedAutoencoder::decode(std::span<const double> z) {
  const nn::Tensor2 v = decode(nn::Tensor2(z.size(), 1, std::vector<double>(z.begin(), z.end())));
  return v.column(0);
}

nn::Batch TrainedAutoencoder::reconstruct(const nn::Batch& x) { return run_half(1, run_half(0, x)); }

void TrainedAutoencoder::save(const std::filesystem::path& path) const {
  nlohmann::json header = {{"model", "autoencoder"},
                           {"spec", spec_},
                           {"seed", seed_},
                           {"history", history_to_json(history_)}};
  save_checkpoint(path, header, net_.params());
}

TrainedAutoencoder TrainedAutoencoder::load(const std::filesystem::path& path,
                                            const AutoencoderSpec* expected) {
  const Checkpoint c = load_checkpoint(path);
  if (c.header.value("model", "") != "autoencoder") {
    throw IoError(path.string() + ": not an autoencoder checkpoint");
  }
  if (expected) check_spec(c, nlohmann::json(*expected), path.string());
  TrainedAutoencoder model(c.header.at("spec").get<AutoencoderSpec>(),
                           c.header.at("seed").get<std::uint64_t>());
  restore_params(c, model.net_.params());
  model.history_ = history_from_json(c.header.at("history"));
  return model;
}

TrainedAutoencoder train_autoencoder(const nn::Tensor2& scaled, const data::AeSplit& split,
                                     const AutoencoderSpec& spec, const TrainParams& params,
                                     std::function<void(const nn::EpochRecord&)> on_epoch) {
  params.validate("autoencoder.train");
  if (scaled.rows() != spec.nodes) {
    throw ShapeError("train_autoencoder: snapshots have " + std::to_string(scaled.rows()) +
                     " nodes, spec expects " + std::to_string(spec.nodes));
  }
  TrainedAutoencoder model(spec, params.seed);
  nn::SupervisedSet train{columns_to_batch(scaled, split.train), columns_to_batch(scaled, split.train)};
  nn::SupervisedSet val{columns_to_batch(scaled, split.validation),
                        columns_to_batch(scaled, split.validation)};
  nn::TrainOptions opts = params.options();
  opts.context = " (autoencoder " + nlohmann::json(spec).dump() + ")";
  opts.on_epoch = std::move(on_epoch);
  model.set_history(nn::fit(model.network(), train, val, nn::mse_loss, opts));
  return model;
}

}  // namespace romf::ae
