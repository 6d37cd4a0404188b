#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "romf/forecast.hpp"

namespace romf::uq {

inline constexpr double kVarianceFloor = 1e-6;

/// Gaussian NLL, mean over every element of
///   log(s2)/2 + (target - mu)^2 / (2 s2),  s2 = softplus(rho) + 1e-6.
struct NllResult {
  double value = 0.0;
  std::vector<double> d_mu;
  std::vector<double> d_rho;
};
NllResult nll(std::span<const double> mu, std::span<const double> rho, std::span<const double> target);

/// Network loss for dual-head outputs (samples, 2, m) against (samples, 1, m).
nn::LossResult nll_loss(const nn::Batch& pred, const nn::Batch& target);

enum class Feedback { MemberMean, EnsembleMean };

struct EnsembleSpec {
  std::size_t members = 10;
  std::uint64_t base_seed = 0;
  fc::ForecasterSpec forecaster;
  Feedback feedback = Feedback::MemberMean;
  double ut_k = 0.2;

  std::uint64_t member_seed(std::size_t i) const { return base_seed + i; }
  void validate() const;
};

void to_json(nlohmann::json& j, const EnsembleSpec& s);
void from_json(const nlohmann::json& j, EnsembleSpec& s);

struct MemberReport {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  bool retried = false;
};

/// Trains `spec.members` dual-head forecasters with NLL, member i seeded
/// base_seed + i, on up to `jobs` threads. A member whose training diverges
/// is retried once with its seed + 1000. Results do not depend on `jobs`.
std::vector<fc::Forecaster> ensemble_train(
    const nn::Tensor2& latents, const data::WindowSplits& windows, const EnsembleSpec& spec,
    const TrainParams& params, std::size_t jobs = 1, std::vector<MemberReport>* reports = nullptr,
    std::function<void(std::size_t member, const nn::EpochRecord&)> on_epoch = {});

struct GaussianLatent {
  std::vector<double> mean;
  std::vector<double> var;
};

/// Moment-matched single Gaussian of the equal-weight mixture:
/// mean = avg(mu_i), var = avg(var_i + mu_i^2) - mean^2, clamped at 0.
GaussianLatent ensemble_aggregate(const std::vector<GaussianLatent>& members);

struct SigmaPointSet {
  /// m x (2m + 1); column 0 is the mean, then +/- pairs per dimension.
  nn::Tensor2 points;
  std::vector<double> weights;
  double k = 0.2;
};

SigmaPointSet sigma_points(const GaussianLatent& latent, double k);

struct GaussianField {
  std::vector<double> mean;
  std::vector<double> var;
};

/// Decodes every sigma point (columns of m x (2m+1)) into physical space and
/// returns the weighted mean and the diagonal of the weighted covariance.
GaussianField ut_transform(const SigmaPointSet& points, const fc::DecodeFn& decode);

struct UqRolloutResult {
  nn::Tensor2 latent_mean;  // m x steps
  nn::Tensor2 latent_var;   // m x steps
  nn::Tensor2 mean;         // n_s x steps
  nn::Tensor2 var;          // n_s x steps
  std::vector<double> step_error;
  /// (member, step) for every member dropped after a non-finite prediction.
  std::vector<std::pair<std::size_t, std::size_t>> dropped;
};

/// Rolls every member forward, aggregates the members' Gaussians at each
/// step and pushes the aggregate through the decoder with the unscented
/// transform. `truth` (physical, n_s x steps) is optional.
UqRolloutResult uq_rollout(std::vector<fc::Forecaster>& members, const nn::Tensor2& seed_window,
                           std::size_t steps, const fc::DecodeFn& decode, double k,
                           Feedback feedback = Feedback::MemberMean,
                           const nn::Tensor2* truth = nullptr);

/// Directory of member checkpoints plus manifest.json.
void save_ensemble(const std::filesystem::path& dir, const EnsembleSpec& spec,
                   const std::vector<fc::Forecaster>& members,
                   const std::vector<MemberReport>& reports);
std::vector<fc::Forecaster> load_ensemble(const std::filesystem::path& dir,
                                          const EnsembleSpec* expected = nullptr);

}  // namespace romf::uq
