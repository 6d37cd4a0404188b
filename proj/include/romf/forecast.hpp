#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "romf/datasets.hpp"
#include "romf/nn/optim.hpp"
#include "romf/train_params.hpp"

namespace romf::fc {

enum class ForecasterType { Cnn, Lstm, TcnTemporal, TcnSpatial };

std::string to_string(ForecasterType t);
ForecasterType forecaster_type_from_string(const std::string& s);

/// One spec covers the four forecasters:
///  - cnn: `blocks` residual blocks on Z^T (n_t channels x m positions),
///    zero-symmetric padding, weight-norm convs + leaky ReLU.
///  - tcn_spatial: same layout, causal padding, dilation 2^l in block l.
///  - tcn_temporal: Z (m channels x n_t positions), causal and dilated;
///    the head reads the final position.
///  - lstm: `lstm_layers` stacked cells of width m, dense head on the last
///    hidden state.
/// With `dual_head` the network also emits a raw variance per component.
/// With `increment` (the default) the network predicts the step change
/// z^{i+1} - z^i divided by the largest training increment, and the last
/// window column is added back at prediction time.
struct ForecasterSpec {
  ForecasterType type = ForecasterType::Cnn;
  std::size_t latent = 50;
  std::size_t lookback = 10;
  std::vector<std::size_t> blocks{50, 50};
  std::size_t kernel = 3;
  std::size_t lstm_layers = 1;
  bool bias = true;
  bool dual_head = false;
  bool increment = true;

  std::size_t heads() const { return dual_head ? 2 : 1; }
  /// Positions whose output can change when one input node changes (CNN
  /// and spatial TCN), per side.
  std::size_t locality_radius() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const ForecasterSpec& s);
void from_json(const nlohmann::json& j, ForecasterSpec& s);

/// Output layout is (samples, heads, m): channel 0 is tanh(mean), channel 1
/// (dual head only) is the raw variance rho.
nn::Sequential build_forecaster(const ForecasterSpec& spec);

/// Window of latent columns (m x n_t, oldest first) in the layout the
/// forecaster consumes, appended as sample `b` of `out`.
void pack_window(const ForecasterSpec& spec, const nn::Tensor2& latents, std::size_t start,
                 nn::Batch& out, std::size_t b);
nn::Batch pack_windows(const ForecasterSpec& spec, const nn::Tensor2& latents,
                       const data::WindowedDataset& windows);
/// Next-step targets in (samples, 1, m) layout.
nn::Batch pack_targets(const nn::Tensor2& latents, const data::WindowedDataset& windows);

class Forecaster {
 public:
  Forecaster(ForecasterSpec spec, std::uint64_t seed);

  const ForecasterSpec& spec() const { return spec_; }
  nn::Network& network() { return net_; }
  const nn::TrainHistory& history() const { return history_; }
  void set_history(nn::TrainHistory h) { history_ = std::move(h); }
  std::uint64_t seed() const { return seed_; }

  /// Multiplier from network output units to latent units (1 for absolute
  /// targets).
  double output_scale() const { return output_scale_; }
  void set_output_scale(double s) { output_scale_ = s; }

  /// Eval-mode next-step prediction for one window (m x n_t). For dual
  /// heads `var` receives the latent variance softplus(rho) + 1e-6 mapped
  /// to latent units; otherwise it is left empty.
  std::vector<double> predict(const nn::Tensor2& window);
  void predict(const nn::Tensor2& window, std::vector<double>& mean, std::vector<double>& var);

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static Forecaster load(const std::filesystem::path& path, const ForecasterSpec* expected = nullptr);

 private:
  ForecasterSpec spec_;
  std::uint64_t seed_;
  nn::Network net_;
  nn::TrainHistory history_;
  double output_scale_ = 1.0;
};

/// Training targets for `windows` in network output units: the next column,
/// or its increment over the last window column divided by `scale`.
nn::Batch pack_targets(const ForecasterSpec& spec, const nn::Tensor2& latents,
                       const data::WindowedDataset& windows, double scale);
/// Largest absolute training increment (the output scale of incremental
/// forecasters).
double increment_scale(const nn::Tensor2& latents, const data::WindowedDataset& windows);

/// Trains on `latents` (m x T) windows with MSE on the mean (single head) or
/// with `loss` when provided. Keeps the best-validation parameters.
Forecaster train_forecaster(const nn::Tensor2& latents, const data::WindowSplits& windows,
                            const ForecasterSpec& spec, const TrainParams& params,
                            const nn::LossFn& loss = {},
                            std::function<void(const nn::EpochRecord&)> on_epoch = {});

struct RolloutResult {
  /// m x steps predicted latents.
  nn::Tensor2 latent;
  /// n_s x steps, decoded and inverse-scaled (empty without a decoder).
  nn::Tensor2 expanded;
  /// Relative L2 per step against the supplied truth (empty otherwise).
  std::vector<double> step_error;
  /// Index of the first non-finite prediction, when the rollout stopped early.
  std::optional<std::size_t> truncated_at;
};

/// Maps a window (m x n_t) to the next latent vector.
using StepFn = std::function<std::vector<double>(const nn::Tensor2& window)>;
/// Maps latent columns (m x k) to physical columns (n_s x k).
using DecodeFn = std::function<nn::Tensor2(const nn::Tensor2& latents)>;

/// Feeds each prediction back: step j sees the last n_t columns of
/// [seed | predictions 1..j-1]. `truth` (n_s x steps, physical units) is
/// optional.
RolloutResult autoregressive_rollout(const StepFn& step, const nn::Tensor2& seed_window,
                                     std::size_t steps, const DecodeFn& decode = {},
                                     const nn::Tensor2* truth = nullptr);

}  // namespace romf::fc
