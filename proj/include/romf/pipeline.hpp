#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "romf/autoencoder.hpp"
#include "romf/datasets.hpp"
#include "romf/evalmetrics.hpp"
#include "romf/forecast.hpp"
#include "romf/train_params.hpp"
#include "romf/uq.hpp"

namespace romf::pipeline {

/// Everything one experiment needs. Parsed from a single JSON file; every
/// section except `problem` is optional and falls back to the benchmark
/// defaults.
struct RunConfig {
  data::ProblemConfig problem;
  ae::AutoencoderSpec autoencoder;
  TrainParams autoencoder_training;
  fc::ForecasterSpec forecaster;
  TrainParams forecaster_training;
  std::optional<uq::EnsembleSpec> ensemble;
  TrainParams ensemble_training;
  std::size_t train_windows = 0;
  /// 1-based time indices for the snapshot line plots.
  std::vector<std::size_t> export_steps;
  std::filesystem::path out = "out";

  void validate() const;
  /// Sets every training seed: the autoencoder and forecaster seeds and the
  /// ensemble base seed.
  void override_seed(std::uint64_t seed);
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Reads and validates a config file. A relative `out` resolves against the
/// current directory.
RunConfig load_config(const std::filesystem::path& path);

/// Artifact locations under the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path snapshots() const { return root / "data" / "snapshots"; }
  std::filesystem::path autoencoder() const { return root / "autoencoder" / "model.ckpt"; }
  std::filesystem::path forecaster() const { return root / "forecaster" / "model.ckpt"; }
  std::filesystem::path ensemble() const { return root / "ensemble"; }
  std::filesystem::path rollout() const { return root / "rollout"; }
  std::filesystem::path uq() const { return root / "uq"; }
  std::filesystem::path evaluation() const { return root / "evaluation"; }
  std::filesystem::path figures() const { return root / "figures"; }
};

/// Each step reads its inputs from and writes its outputs to `config.out`.
/// Training steps print one CSV line per epoch to `log` when it is set.
data::SnapshotMatrix generate(const RunConfig& config);
ae::TrainedAutoencoder train_ae(const RunConfig& config, std::ostream* log = nullptr);
fc::Forecaster train_forecaster(const RunConfig& config, std::ostream* log = nullptr);
std::vector<fc::Forecaster> train_ensemble(const RunConfig& config, std::size_t jobs = 1,
                                           std::ostream* log = nullptr);

/// Summary of a rollout as written to summary.json.
struct RolloutSummary {
  std::size_t steps = 0;
  std::size_t first_step = 0;
  double final_relative_l2 = 0.0;
  double max_relative_l2 = 0.0;
  double mean_relative_l2 = 0.0;
  std::optional<std::size_t> truncated_at;
  /// UQ only: node with the largest time-averaged variance.
  std::optional<std::size_t> variance_argmax;

  nlohmann::json to_json() const;
};

RolloutSummary rollout(const RunConfig& config);
RolloutSummary uq_rollout(const RunConfig& config);

/// Compares two ROMF matrices of identical shape. Without explicit paths the
/// rollout prediction is compared with the test-window truth.
metrics::MetricReport evaluate(const RunConfig& config, const std::optional<std::filesystem::path>& pred = {},
                               const std::optional<std::filesystem::path>& truth = {});

/// Heat maps of truth, predictions and absolute errors, plus snapshot line
/// plots at `export_steps`. Uses whichever rollouts exist.
std::vector<std::filesystem::path> export_figures(const RunConfig& config);

/// Test-window truth (n_s x (T - n_t)) from the stored snapshots.
nn::Tensor2 test_truth(const data::SnapshotMatrix& snap, std::size_t lookback);

}  // namespace romf::pipeline
