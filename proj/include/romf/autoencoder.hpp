#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "romf/datasets.hpp"
#include "romf/nn/activation.hpp"
#include "romf/nn/optim.hpp"
#include "romf/train_params.hpp"

namespace romf::ae {

struct ConvStage {
  std::size_t channels = 8;
  std::size_t stride = 2;
  friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

/// Either an MLP autoencoder ("mlp": dense widths n_s -> hidden... -> m and
/// mirrored back) or a convolutional one ("cae": conv/BN/act/pool stages,
/// then a kernel-1 conv down to one channel so the latent is a coarse
/// spatial field of length n_s / prod(strides)).
struct AutoencoderSpec {
  std::string type = "cae";
  std::size_t nodes = 200;
  // cae
  std::vector<ConvStage> stages{{8, 2}, {32, 2}};
  std::size_t kernel = 5;
  // mlp
  std::vector<std::size_t> hidden{100, 50};
  std::size_t latent = 10;
  nn::ActivationFn activation = nn::ActivationFn::Swish;

  std::size_t latent_dim() const;
  void validate() const;

  static AutoencoderSpec cae_default(const data::ProblemConfig& problem);
  static AutoencoderSpec mlp_default(const data::ProblemConfig& problem, std::size_t latent);
};

void to_json(nlohmann::json& j, const AutoencoderSpec& s);
void from_json(const nlohmann::json& j, AutoencoderSpec& s);

/// Sequential [encoder, decoder]; each half is itself a Sequential.
nn::Sequential build_autoencoder(const AutoencoderSpec& spec);

class TrainedAutoencoder {
 public:
  TrainedAutoencoder(AutoencoderSpec spec, std::uint64_t seed);

  const AutoencoderSpec& spec() const { return spec_; }
  std::size_t latent_dim() const { return spec_.latent_dim(); }
  nn::Network& network() { return net_; }
  const nn::TrainHistory& history() const { return history_; }
  void set_history(nn::TrainHistory h) { history_ = std::move(h); }
  std::uint64_t seed() const { return seed_; }

  /// Scaled snapshot columns (n_s x count) to latent columns (m x count).
  nn::Tensor2 encode(const nn::Tensor2& columns);
  /// Latent columns (m x count) to scaled snapshot columns (n_s x count).
  nn::Tensor2 decode(const nn::Tensor2& latents);
  std::vector<double> encode(std::span<const double> v);
  std::vector<double> decode(std::span<const double> z);

  /// Full round trip on a batch in (samples, 1, n_s) layout.
  nn::Batch reconstruct(const nn::Batch& x);

  void save(const std::filesystem::path& path) const;
  /// Rebuilds the model from the stored spec. When `expected` is given the
  /// stored spec must hash identically.
  static TrainedAutoencoder load(const std::filesystem::path& path,
                                 const AutoencoderSpec* expected = nullptr);

 private:
  nn::Batch run_half(std::size_t half, const nn::Batch& x);

  AutoencoderSpec spec_;
  std::uint64_t seed_;
  nn::Network net_;
  nn::TrainHistory history_;
};

/// Columns of `scaled` (n_s x T) as a (count, 1, n_s) batch.
nn::Batch columns_to_batch(const nn::Tensor2& scaled, std::span<const std::size_t> columns);

/// Minimizes reconstruction MSE on the split's training columns and keeps
/// the parameters with the least validation loss.
TrainedAutoencoder train_autoencoder(const nn::Tensor2& scaled, const data::AeSplit& split,
                                     const AutoencoderSpec& spec, const TrainParams& params,
                                     std::function<void(const nn::EpochRecord&)> on_epoch = {});

}  // namespace romf::ae
