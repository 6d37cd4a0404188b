#include <algorithm>
#include <cmath>
#include <numeric>

#include "romf/config_reader.hpp"
#include "romf/datasets.hpp"
#include "romf/error.hpp"
#include "romf/io.hpp"
#include "romf/nn/param_store.hpp"

namespace romf::data {

Scaler Scaler::fit(std::span<const double> values) {
  if (values.empty()) throw ConfigError("cannot fit a scaler on an empty dataset");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  Scaler s{*lo, *hi};
  s.validate();
  return s;
}

void Scaler::validate() const {
  if (!(max > min)) {
    throw ConfigError("degenerate scaler: max (" + std::to_string(max) + ") must exceed min (" +
                      std::to_string(min) + ")");
  }
}

double Scaler::apply(double v) const { return (v - min) / (max - min); }
double Scaler::invert(double v) const { return min + v * (max - min); }

nn::Tensor2 Scaler::apply(const nn::Tensor2& m) const {
  validate();
  nn::Tensor2 out = m;
  for (double& v : out.data()) v = apply(v);
  return out;
}

nn::Tensor2 Scaler::invert(const nn::Tensor2& m) const {
  validate();
  nn::Tensor2 out = m;
  for (double& v : out.data()) v = invert(v);
  return out;
}

std::vector<double> Scaler::apply(std::span<const double> v) const {
  validate();
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [this](double x) { return apply(x); });
  return out;
}

std::vector<double> Scaler::invert(std::span<const double> v) const {
  validate();
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [this](double x) { return invert(x); });
  return out;
}

void ProblemConfig::validate() const {
  if (kind == "burgers") {
    burgers.validate();
  } else if (kind == "stoker") {
    stoker.validate();
  } else {
    throw ConfigError("problem.kind must be 'burgers' or 'stoker', got '" + kind + "'");
  }
}

void to_json(nlohmann::json& j, const ProblemConfig& c) {
  if (c.kind == "stoker") {
    const auto& s = c.stoker;
    j = {{"kind", "stoker"}, {"length", s.length}, {"x0", s.x0}, {"nodes", s.nodes},
         {"steps", s.steps}, {"t_max", s.t_max},   {"h_up", s.h_up}, {"h_ds", s.h_ds},
         {"g", s.g}};
  } else {
    const auto& b = c.burgers;
    j = {{"kind", "burgers"}, {"length", b.length}, {"t_max", b.t_max},
         {"nodes", b.nodes},  {"steps", b.steps},   {"re", b.re}};
  }
}

void from_json(const nlohmann::json& j, ProblemConfig& c) {
  ConfigReader r(j, "problem");
  r.read("kind", c.kind);
  if (c.kind == "burgers") {
    auto& b = c.burgers;
    r.read("length", b.length).read("t_max", b.t_max).read("nodes", b.nodes);
    r.read("steps", b.steps).read("re", b.re);
  } else if (c.kind == "stoker") {
    auto& s = c.stoker;
    r.read("length", s.length).read("x0", s.x0).read("nodes", s.nodes).read("steps", s.steps);
    r.read("t_max", s.t_max).read("h_up", s.h_up).read("h_ds", s.h_ds).read("g", s.g);
  } else {
    throw ConfigError("problem.kind: must be 'burgers' or 'stoker', got '" + c.kind + "'");
  }
  r.finish();
  c.validate();
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n, lo);
  if (n < 2) return v;
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + step * static_cast<double>(i);
  v.back() = hi;
  return v;
}

SnapshotMatrix generate_snapshots(const ProblemConfig& problem) {
  problem.validate();
  SnapshotMatrix s;
  s.problem = problem;
  if (problem.kind == "burgers") {
    const auto& c = problem.burgers;
    s.grid = linspace(0.0, c.length, c.nodes);
    s.times = linspace(0.0, c.t_max, c.steps);
    s.values = nn::Tensor2(c.nodes, c.steps);
    for (std::size_t i = 0; i < c.nodes; ++i)
      for (std::size_t k = 0; k < c.steps; ++k) s.values(i, k) = burgers_solution(s.grid[i], s.times[k], c);
  } else {
    const auto& c = problem.stoker;
    const StokerMiddleState middle = stoker_middle_state(c);
    s.grid = linspace(0.0, c.length, c.nodes);
    s.times = linspace(0.0, c.t_max, c.steps);
    s.values = nn::Tensor2(c.nodes, c.steps);
    for (std::size_t i = 0; i < c.nodes; ++i)
      for (std::size_t k = 0; k < c.steps; ++k)
        s.values(i, k) = stoker_solution(s.grid[i], s.times[k], c, middle);
  }
  if (!s.values.all_finite()) throw NumericError("generated snapshots contain non-finite values");
  s.scaler = Scaler::fit(s.values.data());
  return s;
}

void save_snapshots(const std::filesystem::path& stem, const SnapshotMatrix& s) {
  auto romf_path = stem;
  romf_path += ".romf";
  auto json_path = stem;
  json_path += ".json";
  nlohmann::json meta = {{"format", "romf-snapshots"},
                         {"version", 1},
                         {"problem", s.problem},
                         {"grid", s.grid},
                         {"times", s.times},
                         {"scaler", {{"min", s.scaler.min}, {"max", s.scaler.max}}}};
  io::write_matrix(romf_path, s.values);
  io::write_file_atomic(json_path, meta.dump(2) + "\n");
}

SnapshotMatrix load_snapshots(const std::filesystem::path& stem) {
  auto romf_path = stem;
  romf_path += ".romf";
  auto json_path = stem;
  json_path += ".json";
  io::require_exists(romf_path, "snapshot matrix");
  io::require_exists(json_path, "snapshot metadata");
  SnapshotMatrix s;
  s.values = io::read_matrix(romf_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(json_path));
    if (meta.at("format") != "romf-snapshots" || meta.at("version") != 1) {
      throw IoError(json_path.string() + ": unsupported snapshot metadata format");
    }
    s.problem = meta.at("problem").get<ProblemConfig>();
    s.grid = meta.at("grid").get<std::vector<double>>();
    s.times = meta.at("times").get<std::vector<double>>();
    s.scaler.min = meta.at("scaler").at("min").get<double>();
    s.scaler.max = meta.at("scaler").at("max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(json_path.string() + ": " + e.what());
  }
  if (s.grid.size() != s.values.rows() || s.times.size() != s.values.cols()) {
    throw ShapeError("snapshot metadata (" + std::to_string(s.grid.size()) + " nodes, " +
                     std::to_string(s.times.size()) + " steps) does not match matrix " +
                     std::to_string(s.values.rows()) + "x" + std::to_string(s.values.cols()));
  }
  return s;
}

WindowSplits make_windows(std::size_t steps, std::size_t lookback, std::size_t train_samples) {
  if (lookback < 1) throw ConfigError("lookback n_t must be >= 1");
  if (lookback >= steps) {
    throw ConfigError("lookback n_t (" + std::to_string(lookback) + ") must be smaller than T (" +
                      std::to_string(steps) + ")");
  }
  const std::size_t total = steps - lookback;
  if (train_samples < 1 || train_samples > total) {
    throw ConfigError("training window count " + std::to_string(train_samples) +
                      " must lie in [1, " + std::to_string(total) + "]");
  }
  WindowSplits w;
  w.train = {"train", lookback, {}, 1};
  w.validation = {"validation", lookback, {}, 1};
  w.test = {"test", lookback, {0}, total};
  for (std::size_t i = 0; i < total; ++i) (i < train_samples ? w.train : w.validation).starts.push_back(i);
  return w;
}

AeSplit make_ae_split(std::size_t steps, std::size_t train_count, std::size_t val_count,
                      std::uint64_t seed) {
  if (train_count < 2 || train_count + val_count > steps) {
    throw ConfigError("autoencoder split " + std::to_string(train_count) + "/" +
                      std::to_string(val_count) + " does not fit " + std::to_string(steps) + " columns");
  }
  std::vector<std::size_t> order(steps);
  std::iota(order.begin(), order.end(), 0);
  nn::Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  AeSplit s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count),
                      order.begin() + static_cast<std::ptrdiff_t>(train_count + val_count));
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

std::size_t default_train_windows(const ProblemConfig& problem) {
  // 150 of 250 (Burgers) and 250 of 450 (Stoker), kept proportional when
  // the step count changes.
  const std::size_t t = problem.steps();
  return problem.kind == "stoker" ? t * 5 / 9 : t * 3 / 5;
}

AeSplit default_ae_split(const ProblemConfig& problem, std::uint64_t seed) {
  const std::size_t t = problem.steps();
  const std::size_t val = problem.kind == "stoker" ? t / 9 : t / 5;
  return make_ae_split(t, t - val, val, seed);
}

}  // namespace romf::data
