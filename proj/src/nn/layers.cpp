#include "romf/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "romf/error.hpp"

namespace romf::nn {

namespace {

std::string_view kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::LSTMCell: return "lstm";
    case LayerKind::BatchNorm1D: return "batch_norm";
    case LayerKind::AvgPool1D: return "avg_pool";
    case LayerKind::Upsample1D: return "upsample";
    case LayerKind::Activation: return "activation";
  }
  return "activation";
}

LayerKind kind_from_name(std::string_view name) {
  for (auto k : {LayerKind::Dense, LayerKind::Conv1D, LayerKind::LSTMCell, LayerKind::BatchNorm1D,
                 LayerKind::AvgPool1D, LayerKind::Upsample1D, LayerKind::Activation}) {
    if (kind_name(k) == name) return k;
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

std::string_view padding_name(Padding p) {
  switch (p) {
    case Padding::None: return "none";
    case Padding::ZeroSymmetric: return "zero_symmetric";
    case Padding::Causal: return "causal";
  }
  return "none";
}

Padding padding_from_name(std::string_view name) {
  for (auto p : {Padding::None, Padding::ZeroSymmetric, Padding::Causal}) {
    if (padding_name(p) == name) return p;
  }
  throw ConfigError("unknown padding mode '" + std::string(name) + "'");
}

}  // namespace

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::size_t dilation, Padding padding, bool weight_norm, bool bias) {
  LayerSpec s;
  s.kind = LayerKind::Conv1D;
  s.in = in_channels;
  s.out = out_channels;
  s.kernel = kernel;
  s.dilation = dilation;
  s.padding = padding;
  s.weight_norm = weight_norm;
  s.bias = bias;
  return s;
}

LayerSpec LayerSpec::lstm(std::size_t input, std::size_t hidden) {
  LayerSpec s;
  s.kind = LayerKind::LSTMCell;
  s.in = input;
  s.out = hidden;
  return s;
}

LayerSpec LayerSpec::batch_norm(std::size_t channels) {
  LayerSpec s;
  s.kind = LayerKind::BatchNorm1D;
  s.in = channels;
  s.out = channels;
  return s;
}

LayerSpec LayerSpec::avg_pool(std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::AvgPool1D;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::upsample(std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::Upsample1D;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::activation(ActivationFn fn) {
  LayerSpec s;
  s.kind = LayerKind::Activation;
  s.fn = fn;
  return s;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::Dense:
    case LayerKind::LSTMCell:
    case LayerKind::BatchNorm1D:
      if (in < 1 || out < 1) throw ConfigError(std::string(kind_name(kind)) + ": widths must be >= 1");
      break;
    case LayerKind::Conv1D:
      if (in < 1 || out < 1) throw ConfigError("conv1d: channel counts must be >= 1");
      if (kernel < 1) throw ConfigError("conv1d: kernel size must be >= 1");
      if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
      if (padding == Padding::ZeroSymmetric && kernel % 2 == 0) {
        throw ConfigError("conv1d: zero-symmetric padding requires an odd kernel size");
      }
      break;
    case LayerKind::AvgPool1D:
    case LayerKind::Upsample1D:
      if (stride < 1) throw ConfigError(std::string(kind_name(kind)) + ": stride must be >= 1");
      break;
    case LayerKind::Activation: break;
  }
}

void to_json(nlohmann::json& j, const LayerSpec& s) {
  j = nlohmann::json{{"kind", kind_name(s.kind)},
                     {"in", s.in},
                     {"out", s.out},
                     {"kernel", s.kernel},
                     {"dilation", s.dilation},
                     {"padding", padding_name(s.padding)},
                     {"weight_norm", s.weight_norm},
                     {"bias", s.bias},
                     {"stride", s.stride},
                     {"fn", to_string(s.fn)}};
}

void from_json(const nlohmann::json& j, LayerSpec& s) {
  s.kind = kind_from_name(j.at("kind").get<std::string>());
  s.in = j.value("in", std::size_t{0});
  s.out = j.value("out", std::size_t{0});
  s.kernel = j.value("kernel", std::size_t{1});
  s.dilation = j.value("dilation", std::size_t{1});
  s.padding = padding_from_name(j.value("padding", std::string("none")));
  s.weight_norm = j.value("weight_norm", false);
  s.bias = j.value("bias", true);
  s.stride = j.value("stride", std::size_t{1});
  s.fn = activation_from_string(j.value("fn", std::string("identity")));
}

void Layer::require_tape(bool present) const {
  if (!present) {
    throw StateError("layer " + std::to_string(index_) + " (" + describe() +
                     "): backward called without a recorded forward pass");
  }
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<Dense>(spec);
    case LayerKind::Conv1D: return std::make_unique<Conv1D>(spec);
    case LayerKind::LSTMCell: return std::make_unique<Lstm>(spec);
    case LayerKind::BatchNorm1D: return std::make_unique<BatchNorm1D>(spec);
    case LayerKind::AvgPool1D: return std::make_unique<AvgPool1D>(spec);
    case LayerKind::Upsample1D: return std::make_unique<Upsample1D>(spec);
    case LayerKind::Activation: return std::make_unique<Activation>(spec.fn);
  }
  throw ConfigError("make_layer: unhandled kind");
}

// ---------------------------------------------------------------------------
// Pooling / upsampling

std::vector<double> avg_pool1d(std::span<const double> v, std::size_t stride) {
  if (stride < 1) throw ConfigError("avg_pool1d: stride must be >= 1");
  if (v.empty()) throw ShapeError("avg_pool1d: empty input");
  const std::size_t n = (v.size() + stride - 1) / stride;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i * stride;
    const std::size_t hi = std::min(lo + stride, v.size());
    double s = 0.0;
    for (std::size_t j = lo; j < hi; ++j) s += v[j];
    out[i] = s / static_cast<double>(hi - lo);
  }
  return out;
}

std::vector<double> upsample1d(std::span<const double> v, std::size_t stride) {
  if (stride < 1) throw ConfigError("upsample1d: stride must be >= 1");
  std::vector<double> out(v.size() * stride);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i / stride];
  return out;
}

AvgPool1D::AvgPool1D(const LayerSpec& spec) : spec_(spec) { spec_.validate(); }

void AvgPool1D::bind(ParamStore&, Rng&, std::size_t index) { index_ = index; }

Batch AvgPool1D::forward(const Batch& x, ParamStore&, Mode) {
  const std::size_t s = spec_.stride;
  const std::size_t n = (x.length() + s - 1) / s;
  if (x.length() == 0) throw ShapeError("avg_pool: empty input");
  Batch out(x.samples(), x.channels(), n);
  for (std::size_t b = 0; b < x.samples(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const double* src = &x.data()[(b * x.channels() + c) * x.length()];
      auto pooled = avg_pool1d({src, x.length()}, s);
      std::copy(pooled.begin(), pooled.end(), &out.at(b, c, 0));
    }
  input_length_ = x.length();
  return out;
}

Batch AvgPool1D::backward(const Batch& g, ParamStore&) {
  require_tape(input_length_.has_value());
  const std::size_t s = spec_.stride;
  const std::size_t len = *input_length_;
  Batch dx(g.samples(), g.channels(), len);
  for (std::size_t b = 0; b < g.samples(); ++b)
    for (std::size_t c = 0; c < g.channels(); ++c)
      for (std::size_t i = 0; i < g.length(); ++i) {
        const std::size_t lo = i * s;
        const std::size_t hi = std::min(lo + s, len);
        const double share = g.at(b, c, i) / static_cast<double>(hi - lo);
        for (std::size_t j = lo; j < hi; ++j) dx.at(b, c, j) = share;
      }
  input_length_.reset();
  return dx;
}

std::string AvgPool1D::describe() const { return "AvgPool1D(s=" + std::to_string(spec_.stride) + ")"; }

Upsample1D::Upsample1D(const LayerSpec& spec) : spec_(spec) { spec_.validate(); }

void Upsample1D::bind(ParamStore&, Rng&, std::size_t index) { index_ = index; }

Batch Upsample1D::forward(const Batch& x, ParamStore&, Mode) {
  const std::size_t s = spec_.stride;
  Batch out(x.samples(), x.channels(), x.length() * s);
  for (std::size_t b = 0; b < x.samples(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t l = 0; l < out.length(); ++l) out.at(b, c, l) = x.at(b, c, l / s);
  input_length_ = x.length();
  return out;
}

Batch Upsample1D::backward(const Batch& g, ParamStore&) {
  require_tape(input_length_.has_value());
  const std::size_t s = spec_.stride;
  Batch dx(g.samples(), g.channels(), *input_length_);
  for (std::size_t b = 0; b < g.samples(); ++b)
    for (std::size_t c = 0; c < g.channels(); ++c)
      for (std::size_t l = 0; l < g.length(); ++l) dx.at(b, c, l / s) += g.at(b, c, l);
  input_length_.reset();
  return dx;
}

std::string Upsample1D::describe() const { return "Upsample1D(s=" + std::to_string(spec_.stride) + ")"; }

// ---------------------------------------------------------------------------
// Activation and shape plumbing

Activation::Activation(ActivationFn fn, std::size_t first_channel, std::size_t last_channel)
    : fn_(fn), first_(first_channel), last_(last_channel) {}

void Activation::bind(ParamStore&, Rng&, std::size_t index) { index_ = index; }

Batch Activation::forward(const Batch& x, ParamStore&, Mode) {
  Batch out = x;
  const std::size_t hi = std::min(last_, x.channels());
  for (std::size_t b = 0; b < x.samples(); ++b)
    for (std::size_t c = first_; c < hi; ++c)
      for (std::size_t l = 0; l < x.length(); ++l) out.at(b, c, l) = activate(fn_, x.at(b, c, l));
  input_ = x;
  return out;
}

Batch Activation::backward(const Batch& g, ParamStore&) {
  require_tape(input_.has_value());
  const Batch& x = *input_;
  if (!g.same_shape(x)) throw ShapeError("activation backward: gradient shape mismatch");
  Batch dx = g;
  const std::size_t hi = std::min(last_, x.channels());
  for (std::size_t b = 0; b < x.samples(); ++b)
    for (std::size_t c = first_; c < hi; ++c)
      for (std::size_t l = 0; l < x.length(); ++l)
        dx.at(b, c, l) *= activate_derivative(fn_, x.at(b, c, l));
  input_.reset();
  return dx;
}

std::string Activation::describe() const { return "Activation(" + std::string(to_string(fn_)) + ")"; }

void LastStep::bind(ParamStore&, Rng&, std::size_t index) { index_ = index; }

Batch LastStep::forward(const Batch& x, ParamStore&, Mode) {
  if (x.length() == 0) throw ShapeError("LastStep: empty sequence");
  Batch out(x.samples(), 1, x.channels());
  for (std::size_t b = 0; b < x.samples(); ++b)
    for (std::size_t c = 0; c < x.channels(); ++c) out.at(b, 0, c) = x.at(b, c, x.length() - 1);
  shape_ = Batch(0, x.channels(), x.length());
  return out;
}

Batch LastStep::backward(const Batch& g, ParamStore&) {
  require_tape(shape_.has_value());
  Batch dx(g.samples(), shape_->channels(), shape_->length());
  for (std::size_t b = 0; b < g.samples(); ++b)
    for (std::size_t c = 0; c < dx.channels(); ++c) dx.at(b, c, dx.length() - 1) = g.at(b, 0, c);
  shape_.reset();
  return dx;
}

void Reshape::bind(ParamStore&, Rng&, std::size_t index) { index_ = index; }

Batch Reshape::forward(const Batch& x, ParamStore&, Mode) {
  input_shape_ = {x.channels(), x.length()};
  return x.reshaped(channels_, length_);
}

Batch Reshape::backward(const Batch& g, ParamStore&) {
  require_tape(input_shape_.has_value());
  auto [c, l] = *input_shape_;
  input_shape_.reset();
  return g.reshaped(c, l);
}

std::string Reshape::describe() const {
  return "Reshape(" + std::to_string(channels_) + ", " + std::to_string(length_) + ")";
}

// ---------------------------------------------------------------------------
// Composites

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

void Sequential::bind(ParamStore& store, Rng& rng, std::size_t index) {
  index_ = index;
  next_index_ = index;
  for (auto& l : layers_) l->bind(store, rng, next_index_++);
}

Batch Sequential::forward(const Batch& x, ParamStore& store, Mode mode) {
  Batch h = x;
  for (auto& l : layers_) h = l->forward(h, store, mode);
  return h;
}

Batch Sequential::backward(const Batch& grad_out, ParamStore& store) {
  Batch g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, store);
  return g;
}

std::string Sequential::describe() const {
  std::string s = "Sequential[";
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i) s += ", ";
    s += layers_[i]->describe();
  }
  return s + "]";
}

ResidualBlock::ResidualBlock(Sequential branch, std::unique_ptr<Layer> shortcut, ActivationFn post)
    : branch_(std::move(branch)), shortcut_(std::move(shortcut)), post_(post) {}

void ResidualBlock::bind(ParamStore& store, Rng& rng, std::size_t index) {
  index_ = index;
  branch_.bind(store, rng, index);
  if (shortcut_) shortcut_->bind(store, rng, index);
  post_.bind(store, rng, index);
}

Batch ResidualBlock::forward(const Batch& x, ParamStore& store, Mode mode) {
  Batch f = branch_.forward(x, store, mode);
  Batch s = shortcut_ ? shortcut_->forward(x, store, mode) : x;
  if (!f.same_shape(s)) {
    throw ShapeError("residual block: branch output " + f.shape_string() +
                     " does not match shortcut " + s.shape_string());
  }
  auto fd = f.data();
  auto sd = s.data();
  for (std::size_t i = 0; i < fd.size(); ++i) fd[i] += sd[i];
  return post_.forward(f, store, mode);
}

Batch ResidualBlock::backward(const Batch& grad_out, ParamStore& store) {
  Batch g = post_.backward(grad_out, store);
  Batch dx = branch_.backward(g, store);
  Batch ds = shortcut_ ? shortcut_->backward(g, store) : g;
  auto dd = dx.data();
  auto sd = ds.data();
  for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += sd[i];
  return dx;
}

std::string ResidualBlock::describe() const {
  return "Residual(" + branch_.describe() + (shortcut_ ? ", " + shortcut_->describe() : "") + ")";
}

}  // namespace romf::nn
