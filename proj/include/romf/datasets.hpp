#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "romf/nn/tensor.hpp"

namespace romf::data {

/// Viscous Burgers' equation on [0, L] with the closed-form solution
/// u(x,t) = (x/(t+1)) / (1 + sqrt((t+1)/t0) exp(Re x^2 / (4t+4))),
/// t0 = exp(Re/8).
struct BurgersConfig {
  double length = 1.0;
  double t_max = 2.0;
  std::size_t nodes = 200;
  std::size_t steps = 250;
  double re = 300.0;

  double nu() const { return 1.0 / re; }
  double t0() const;
  void validate() const;
};

/// Stoker's dam break over a wet bed.
struct StokerConfig {
  double length = 100.0;
  double x0 = 50.0;
  std::size_t nodes = 1000;
  std::size_t steps = 450;
  double t_max = 3.6;
  double h_up = 10.0;
  double h_ds = 1.0;
  double g = 9.81;

  void validate() const;
};

struct StokerMiddleState {
  double c_m = 0.0;
  double h_m = 0.0;
  /// Jump-condition residual at c_m divided by (g h_up)^3.
  double residual = 0.0;
};

/// Wave positions at time t: rarefaction tail x_A, rarefaction head x_B,
/// shock x_C.
struct StokerFronts {
  double x_a = 0.0;
  double x_b = 0.0;
  double x_c = 0.0;
};

double burgers_initial(double x, const BurgersConfig& config);
double burgers_solution(double x, double t, const BurgersConfig& config);

/// Jump condition f(c) = -8 g h_ds c^2 (sqrt(g h_up) - c)^2
///                       + (c^2 - g h_ds)^2 (c^2 + g h_ds).
double stoker_jump_polynomial(double c, const StokerConfig& config);
/// Root of the jump condition on (sqrt(g h_ds), sqrt(g h_up)) by bisection.
StokerMiddleState stoker_middle_state(const StokerConfig& config);
StokerFronts stoker_fronts(double t, const StokerConfig& config, const StokerMiddleState& middle);
double stoker_solution(double x, double t, const StokerConfig& config,
                       const StokerMiddleState& middle);

/// Min-max map of a whole dataset onto [0, 1].
struct Scaler {
  double min = 0.0;
  double max = 1.0;

  static Scaler fit(std::span<const double> values);
  void validate() const;
  double apply(double v) const;
  double invert(double v) const;
  nn::Tensor2 apply(const nn::Tensor2& m) const;
  nn::Tensor2 invert(const nn::Tensor2& m) const;
  std::vector<double> apply(std::span<const double> v) const;
  std::vector<double> invert(std::span<const double> v) const;
};

struct ProblemConfig {
  std::string kind = "burgers";  // "burgers" | "stoker"
  BurgersConfig burgers;
  StokerConfig stoker;

  std::size_t nodes() const { return kind == "stoker" ? stoker.nodes : burgers.nodes; }
  std::size_t steps() const { return kind == "stoker" ? stoker.steps : burgers.steps; }
  void validate() const;
};

void to_json(nlohmann::json& j, const ProblemConfig& c);
/// Missing fields keep their defaults; unknown or ill-typed fields throw
/// ConfigError naming the field.
void from_json(const nlohmann::json& j, ProblemConfig& c);

/// Column i is the solution at times[i] sampled on grid.
struct SnapshotMatrix {
  nn::Tensor2 values;
  std::vector<double> grid;
  std::vector<double> times;
  Scaler scaler;
  ProblemConfig problem;

  std::size_t nodes() const { return values.rows(); }
  std::size_t steps() const { return values.cols(); }
  nn::Tensor2 scaled() const { return scaler.apply(values); }
};

/// Uniform samples of [lo, hi] including both endpoints.
std::vector<double> linspace(double lo, double hi, std::size_t n);

SnapshotMatrix generate_snapshots(const ProblemConfig& problem);

/// `<stem>.romf` holds the raw values; `<stem>.json` holds grid, times,
/// scaler and the config echo.
void save_snapshots(const std::filesystem::path& stem, const SnapshotMatrix& s);
SnapshotMatrix load_snapshots(const std::filesystem::path& stem);

/// Windows over a series of T columns. Window i reads columns
/// [start_i, start_i + lookback) and predicts column start_i + lookback.
struct WindowedDataset {
  std::string split;
  std::size_t lookback = 0;
  std::vector<std::size_t> starts;
  /// Number of target columns following each window: 1 for training and
  /// validation, T - lookback for the single autoregressive test window.
  std::size_t horizon = 1;

  std::size_t size() const { return starts.size(); }
};

struct WindowSplits {
  WindowedDataset train;
  WindowedDataset validation;
  WindowedDataset test;
};

/// First `train_samples` windows train, the rest validate, and the test
/// window is the first `lookback` columns with every remaining column as
/// its target.
WindowSplits make_windows(std::size_t steps, std::size_t lookback, std::size_t train_samples);

struct AeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded random partition of the column indices.
AeSplit make_ae_split(std::size_t steps, std::size_t train_count, std::size_t val_count,
                      std::uint64_t seed);

/// Default training-window count and AE split sizes per benchmark.
std::size_t default_train_windows(const ProblemConfig& problem);
AeSplit default_ae_split(const ProblemConfig& problem, std::uint64_t seed);

}  // namespace romf::data
