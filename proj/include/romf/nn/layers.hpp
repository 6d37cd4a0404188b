#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "romf/nn/activation.hpp"
#include "romf/nn/param_store.hpp"
#include "romf/nn/tensor.hpp"

namespace romf::nn {

enum class Mode { Train, Eval };

enum class LayerKind { Dense, Conv1D, LSTMCell, BatchNorm1D, AvgPool1D, Upsample1D, Activation };

enum class Padding { None, ZeroSymmetric, Causal };

/// Architecture descriptor for one primitive layer. Which fields matter
/// depends on `kind`: Dense uses in/out widths, Conv1D in/out channels plus
/// kernel, dilation, padding and weight norm, LSTMCell input and hidden
/// width, BatchNorm1D `in` channels, pooling and upsampling `stride`.
struct LayerSpec {
  LayerKind kind = LayerKind::Activation;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  Padding padding = Padding::None;
  bool weight_norm = false;
  bool bias = true;
  std::size_t stride = 1;
  ActivationFn fn = ActivationFn::Identity;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t dilation = 1, Padding padding = Padding::None,
                          bool weight_norm = false, bool bias = true);
  static LayerSpec lstm(std::size_t input, std::size_t hidden);
  static LayerSpec batch_norm(std::size_t channels);
  static LayerSpec avg_pool(std::size_t stride);
  static LayerSpec upsample(std::size_t stride);
  static LayerSpec activation(ActivationFn fn);

  /// Throws ConfigError when the invariants of the kind are violated.
  void validate() const;
};

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);

/// One differentiable stage. A layer registers its parameters in a
/// ParamStore when bound, records what it needs for the reverse pass during
/// `forward`, and consumes that record in `backward`, accumulating parameter
/// gradients into the store and returning the gradient with respect to its
/// input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual void bind(ParamStore& store, Rng& rng, std::size_t index) = 0;
  virtual Batch forward(const Batch& x, ParamStore& store, Mode mode) = 0;
  virtual Batch backward(const Batch& grad_out, ParamStore& store) = 0;
  virtual std::string describe() const = 0;

  std::size_t index() const { return index_; }

 protected:
  void require_tape(bool present) const;
  std::size_t index_ = 0;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

class Dense final : public Layer {
 public:
  explicit Dense(const LayerSpec& spec);
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

  std::size_t weight_block() const { return weight_; }
  std::size_t bias_block() const { return bias_; }

 private:
  LayerSpec spec_;
  std::size_t weight_ = 0;
  std::size_t bias_ = 0;
  std::optional<Batch> input_;
};

/// 1D convolution over the position axis, computed as im2col + GEMM.
/// With weight normalization the effective filter for output channel o is
/// g_o * v_o / max(|v_o|, 1e-12).
class Conv1D final : public Layer {
 public:
  explicit Conv1D(const LayerSpec& spec);
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

  const LayerSpec& spec() const { return spec_; }
  std::size_t weight_block() const { return weight_; }
  std::optional<std::size_t> gain_block() const { return gain_; }
  std::optional<std::size_t> bias_block() const { return bias_; }

  std::size_t left_pad() const;
  std::size_t right_pad() const;
  /// Output length for an input of length `length`; throws ShapeError when
  /// the dilated kernel does not fit.
  std::size_t output_length(std::size_t length) const;
  /// Effective weights (cout x cin*k, row-major) for the current parameters.
  std::vector<double> effective_weights(const ParamStore& store) const;

 private:
  LayerSpec spec_;
  std::size_t weight_ = 0;
  std::optional<std::size_t> gain_;
  std::optional<std::size_t> bias_;
  struct Tape {
    std::size_t samples = 0;
    std::size_t length = 0;
    std::size_t out_length = 0;
    std::vector<double> columns;  // (cin*k) x (samples*out_length), row-major
    std::vector<double> weights;  // effective weights used in forward
  };
  std::optional<Tape> tape_;
};

/// Single-layer LSTM run over the position (time) axis. Input (B, in, T),
/// output the hidden sequence (B, hidden, T). h0 = c0 = 0. Gate order in the
/// packed weights is input, forget, candidate, output.
class Lstm final : public Layer {
 public:
  explicit Lstm(const LayerSpec& spec);
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

  std::size_t input_weight_block() const { return w_in_; }
  std::size_t recurrent_weight_block() const { return w_rec_; }
  std::size_t bias_block() const { return bias_; }

 private:
  LayerSpec spec_;
  std::size_t w_in_ = 0;
  std::size_t w_rec_ = 0;
  std::size_t bias_ = 0;
  struct Tape {
    std::size_t samples = 0;
    std::size_t steps = 0;
    // Per step, (B x in) inputs, (B x 4h) activated gates, (B x h) cell states.
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> gates;
    std::vector<std::vector<double>> cells;
    std::vector<std::vector<double>> hiddens;
  };
  std::optional<Tape> tape_;
};

/// Per-channel batch normalization over (samples, positions).
class BatchNorm1D final : public Layer {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  explicit BatchNorm1D(const LayerSpec& spec);
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

  std::size_t scale_block() const { return scale_; }
  std::size_t shift_block() const { return shift_; }
  std::size_t running_mean_buffer() const { return running_mean_; }
  std::size_t running_var_buffer() const { return running_var_; }

 private:
  LayerSpec spec_;
  std::size_t scale_ = 0;
  std::size_t shift_ = 0;
  std::size_t running_mean_ = 0;
  std::size_t running_var_ = 0;
  struct Tape {
    Mode mode = Mode::Train;
    Batch normalized;
    std::vector<double> inv_std;
  };
  std::optional<Tape> tape_;
};

/// Non-overlapping average pooling. A trailing remainder shorter than the
/// stride is averaged as its own window, so the output length is ceil(L/s).
class AvgPool1D final : public Layer {
 public:
  explicit AvgPool1D(const LayerSpec& spec);
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

 private:
  LayerSpec spec_;
  std::optional<std::size_t> input_length_;
};

/// Nearest-neighbour upsampling: each value repeated `stride` times.
class Upsample1D final : public Layer {
 public:
  explicit Upsample1D(const LayerSpec& spec);
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

 private:
  LayerSpec spec_;
  std::optional<std::size_t> input_length_;
};

/// Elementwise activation, optionally restricted to channels [first, last).
class Activation final : public Layer {
 public:
  explicit Activation(ActivationFn fn, std::size_t first_channel = 0,
                      std::size_t last_channel = static_cast<std::size_t>(-1));
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

 private:
  ActivationFn fn_;
  std::size_t first_;
  std::size_t last_;
  std::optional<Batch> input_;
};

/// (B, C, T) -> (B, 1, C): keeps only the final position.
class LastStep final : public Layer {
 public:
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override { return "LastStep"; }

 private:
  std::optional<Batch> shape_;
};

/// Reinterprets each sample's features as (channels, length).
class Reshape final : public Layer {
 public:
  Reshape(std::size_t channels, std::size_t length) : channels_(channels), length_(length) {}
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

 private:
  std::size_t channels_;
  std::size_t length_;
  std::optional<std::pair<std::size_t, std::size_t>> input_shape_;
};

/// Ordered stack of layers; itself a layer so stacks compose.
class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential& add(std::unique_ptr<Layer> layer);
  Sequential& add(const LayerSpec& spec) { return add(make_layer(spec)); }

  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }
  /// Index that the next bound layer will receive.
  std::size_t next_index() const { return next_index_; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::size_t next_index_ = 0;
};

/// out = act(branch(x) + shortcut(x)); shortcut is identity when absent.
class ResidualBlock final : public Layer {
 public:
  ResidualBlock(Sequential branch, std::unique_ptr<Layer> shortcut, ActivationFn post);
  void bind(ParamStore& store, Rng& rng, std::size_t index) override;
  Batch forward(const Batch& x, ParamStore& store, Mode mode) override;
  Batch backward(const Batch& grad_out, ParamStore& store) override;
  std::string describe() const override;

  Sequential& branch() { return branch_; }
  Layer* shortcut() { return shortcut_.get(); }

 private:
  Sequential branch_;
  std::unique_ptr<Layer> shortcut_;
  Activation post_;
};

/// Weight normalization: w_o = g_o * v_o / max(|v_o|, 1e-12) for each of the
/// `filters` rows of `direction`.
std::vector<double> weight_norm_apply(std::span<const double> direction,
                                      std::span<const double> gain);

std::vector<double> avg_pool1d(std::span<const double> v, std::size_t stride);
std::vector<double> upsample1d(std::span<const double> v, std::size_t stride);

/// Parameters of a single LSTM cell in the packed layout used by Lstm.
struct LstmCellParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::vector<double> w_in;   // 4h x input
  std::vector<double> w_rec;  // 4h x hidden
  std::vector<double> bias;   // 4h
};

struct LstmCellState {
  std::vector<double> h;
  std::vector<double> c;
};

LstmCellState lstm_cell_step(std::span<const double> x, std::span<const double> h_prev,
                             std::span<const double> c_prev, const LstmCellParams& params);

}  // namespace romf::nn
