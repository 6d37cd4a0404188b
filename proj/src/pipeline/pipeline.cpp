#include "romf/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "romf/config_reader.hpp"
#include "romf/error.hpp"
#include "romf/io.hpp"

namespace romf::pipeline {

namespace fs = std::filesystem;

namespace {

std::vector<std::size_t> default_export_steps(const data::ProblemConfig& p) {
  if (p.kind == "stoker") return {320, 370, 420};
  return {180, 200, 220};
}

void write_json(const fs::path& path, const nlohmann::json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

void log_header(std::ostream* log, const char* columns) {
  if (log) *log << columns << '\n' << std::flush;
}

void log_epoch(std::ostream* log, const nn::EpochRecord& e, const std::string& prefix = "") {
  if (!log) return;
  *log << prefix << e.epoch << ',' << metrics::format_double(e.train_loss) << ','
       << metrics::format_double(e.val_loss) << '\n' << std::flush;
}

data::SnapshotMatrix load_data(const RunConfig& c) {
  const Layout L{c.out};
  auto stem = L.snapshots();
  io::require_exists(fs::path(stem) += ".romf", "snapshot matrix (run `romf generate` first)");
  auto snap = data::load_snapshots(stem);
  if (snap.nodes() != c.problem.nodes() || snap.steps() != c.problem.steps()) {
    throw ShapeError("stored snapshots are " + std::to_string(snap.nodes()) + "x" + std::to_string(snap.steps()) +
                     " but the config describes " + std::to_string(c.problem.nodes()) + "x" +
                     std::to_string(c.problem.steps()));
  }
  return snap;
}

ae::TrainedAutoencoder load_ae(const RunConfig& c) {
  const Layout L{c.out};
  io::require_exists(L.autoencoder(), "autoencoder checkpoint (run `romf train-ae` first)");
  return ae::TrainedAutoencoder::load(L.autoencoder(), &c.autoencoder);
}

data::WindowSplits windows_for(const RunConfig& c, std::size_t lookback) {
  return data::make_windows(c.problem.steps(), lookback, c.train_windows);
}

fc::DecodeFn physical_decoder(ae::TrainedAutoencoder& model, const data::Scaler& scaler) {
  return [&model, scaler](const nn::Tensor2& z) { return scaler.invert(model.decode(z)); };
}

std::string curve_csv(std::size_t first_step, const std::vector<double>& err) {
  std::vector<double> t(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) t[i] = static_cast<double>(first_step + i);
  return metrics::columns_to_csv({"step", "relative_l2"}, {t, err});
}

RolloutSummary summarize(const std::vector<double>& err, std::size_t lookback, std::size_t steps) {
  RolloutSummary s;
  s.steps = steps;
  s.first_step = lookback + 1;
  if (!err.empty()) {
    s.final_relative_l2 = err.back();
    s.max_relative_l2 = *std::max_element(err.begin(), err.end());
    double sum = 0.0;
    for (double e : err) sum += e;
    s.mean_relative_l2 = sum / static_cast<double>(err.size());
  }
  return s;
}

}  // namespace

void RunConfig::validate() const {
  problem.validate();
  autoencoder.validate();
  forecaster.validate();
  autoencoder_training.validate("autoencoder_training");
  forecaster_training.validate("forecaster_training");
  if (autoencoder.nodes != problem.nodes()) {
    throw ConfigError("autoencoder.nodes (" + std::to_string(autoencoder.nodes) + ") must equal the problem's nodes (" +
                      std::to_string(problem.nodes()) + ")");
  }
  const std::size_t m = autoencoder.latent_dim();
  if (forecaster.latent != m) {
    throw ConfigError("forecaster.latent (" + std::to_string(forecaster.latent) +
                      ") must equal the autoencoder latent size (" + std::to_string(m) + ")");
  }
  auto check_windows = [&](std::size_t lookback, const char* where) {
    if (lookback >= problem.steps()) throw ConfigError(std::string(where) + ".lookback must be below the step count");
    const std::size_t total = problem.steps() - lookback;
    if (train_windows < 1 || train_windows >= total) {
      throw ConfigError("train_windows must lie in [1, " + std::to_string(total - 1) + "] for " + where);
    }
  };
  check_windows(forecaster.lookback, "forecaster");
  if (ensemble) {
    ensemble->validate();
    ensemble_training.validate("ensemble_training");
    if (ensemble->forecaster.latent != m) throw ConfigError("ensemble.forecaster.latent must equal the autoencoder latent size");
    check_windows(ensemble->forecaster.lookback, "ensemble.forecaster");
  }
  for (std::size_t s : export_steps) {
    if (s < 1 || s > problem.steps()) {
      throw ConfigError("export_steps: " + std::to_string(s) + " is outside [1, " + std::to_string(problem.steps()) + "]");
    }
  }
  if (out.empty()) throw ConfigError("out must not be empty");
}

void RunConfig::override_seed(std::uint64_t seed) {
  autoencoder_training.seed = seed;
  forecaster_training.seed = seed;
  ensemble_training.seed = seed;
  if (ensemble) ensemble->base_seed = seed;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"problem", c.problem},
       {"autoencoder", c.autoencoder},
       {"autoencoder_training", c.autoencoder_training},
       {"forecaster", c.forecaster},
       {"forecaster_training", c.forecaster_training},
       {"train_windows", c.train_windows},
       {"export_steps", c.export_steps},
       {"out", c.out.generic_string()}};
  if (c.ensemble) {
    j["ensemble"] = *c.ensemble;
    j["ensemble_training"] = c.ensemble_training;
  }
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  ConfigReader r(j, "");
  if (!r.has("problem")) throw ConfigError("problem: required field is missing");
  r.read("problem", c.problem);
  // Section values overlay the benchmark defaults.
  c.autoencoder = ae::AutoencoderSpec::cae_default(c.problem);
  if (r.has("autoencoder")) {
    try {
      ae::from_json(r.at("autoencoder"), c.autoencoder);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("autoencoder: ") + e.what());
    }
  }
  r.read("autoencoder_training", c.autoencoder_training);

  // The forecaster's latent width follows the autoencoder unless given.
  c.forecaster = fc::ForecasterSpec{};
  c.forecaster.latent = c.autoencoder.latent_dim();
  if (r.has("forecaster")) {
    nlohmann::json f = r.at("forecaster");
    if (f.is_object() && !f.contains("latent")) f["latent"] = c.forecaster.latent;
    try {
      c.forecaster = f.get<fc::ForecasterSpec>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("forecaster: ") + e.what());
    }
  }
  r.read("forecaster_training", c.forecaster_training);

  c.ensemble.reset();
  if (r.has("ensemble")) {
    nlohmann::json e = r.at("ensemble");
    if (!e.is_object()) throw ConfigError("ensemble: expected a JSON object");
    // Members inherit the forecaster section, with a variance head.
    nlohmann::json f = c.forecaster;
    f["dual_head"] = true;
    if (e.contains("forecaster")) {
      if (!e["forecaster"].is_object()) throw ConfigError("ensemble.forecaster: expected a JSON object");
      f.update(e["forecaster"]);
    }
    e["forecaster"] = f;
    try {
      c.ensemble = e.get<uq::EnsembleSpec>();
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("ensemble: ") + ex.what());
    }
  }
  c.ensemble_training = c.forecaster_training;
  r.read("ensemble_training", c.ensemble_training);

  c.train_windows = data::default_train_windows(c.problem);
  r.read("train_windows", c.train_windows);
  c.export_steps = default_export_steps(c.problem);
  r.read("export_steps", c.export_steps);
  std::string out = c.out.generic_string();
  r.read("out", out);
  c.out = out;
  r.finish();
  c.validate();
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j.get<RunConfig>();
}

nn::Tensor2 test_truth(const data::SnapshotMatrix& snap, std::size_t lookback) {
  if (lookback >= snap.steps()) throw ShapeError("lookback exceeds the snapshot count");
  return snap.values.columns(lookback, snap.steps() - lookback);
}

nlohmann::json RolloutSummary::to_json() const {
  nlohmann::json j = {{"steps", steps},
                      {"first_step", first_step},
                      {"final_relative_l2", final_relative_l2},
                      {"max_relative_l2", max_relative_l2},
                      {"mean_relative_l2", mean_relative_l2}};
  if (truncated_at) j["truncated_at"] = *truncated_at;
  if (variance_argmax) j["variance_argmax"] = *variance_argmax;
  return j;
}

data::SnapshotMatrix generate(const RunConfig& config) {
  config.validate();
  auto snap = data::generate_snapshots(config.problem);
  data::save_snapshots(Layout{config.out}.snapshots(), snap);
  return snap;
}

ae::TrainedAutoencoder train_ae(const RunConfig& config, std::ostream* log) {
  const auto snap = load_data(config);
  const auto split = data::default_ae_split(config.problem, config.autoencoder_training.seed);
  log_header(log, "epoch,train_loss,val_loss");
  auto model = ae::train_autoencoder(snap.scaled(), split, config.autoencoder, config.autoencoder_training,
                                     [&](const nn::EpochRecord& e) { log_epoch(log, e); });
  const Layout L{config.out};
  model.save(L.autoencoder());
  write_json(L.autoencoder().parent_path() / "history.json", history_to_json(model.history()));
  return model;
}

fc::Forecaster train_forecaster(const RunConfig& config, std::ostream* log) {
  const auto snap = load_data(config);
  auto model = load_ae(config);
  const auto z = model.encode(snap.scaled());
  log_header(log, "epoch,train_loss,val_loss");
  auto f = fc::train_forecaster(z, windows_for(config, config.forecaster.lookback), config.forecaster,
                                config.forecaster_training, {},
                                [&](const nn::EpochRecord& e) { log_epoch(log, e); });
  const Layout L{config.out};
  f.save(L.forecaster());
  write_json(L.forecaster().parent_path() / "history.json", history_to_json(f.history()));
  return f;
}

std::vector<fc::Forecaster> train_ensemble(const RunConfig& config, std::size_t jobs, std::ostream* log) {
  if (!config.ensemble) throw ConfigError("ensemble: section is required for train-ensemble");
  const auto snap = load_data(config);
  auto model = load_ae(config);
  const auto z = model.encode(snap.scaled());
  const auto& spec = *config.ensemble;
  std::vector<uq::MemberReport> reports;
  log_header(log, "member,epoch,train_loss,val_loss");
  auto members = uq::ensemble_train(z, windows_for(config, spec.forecaster.lookback), spec, config.ensemble_training,
                                    jobs, &reports, [&](std::size_t i, const nn::EpochRecord& e) {
                                      log_epoch(log, e, std::to_string(i) + ",");
                                    });
  const Layout L{config.out};
  uq::save_ensemble(L.ensemble(), spec, members, reports);
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& m : members) hist.push_back(history_to_json(m.history()));
  write_json(L.ensemble() / "history.json", hist);
  return members;
}

RolloutSummary rollout(const RunConfig& config) {
  const auto snap = load_data(config);
  auto model = load_ae(config);
  const Layout L{config.out};
  io::require_exists(L.forecaster(), "forecaster checkpoint (run `romf train-forecaster` first)");
  auto f = fc::Forecaster::load(L.forecaster(), &config.forecaster);
  const std::size_t nt = config.forecaster.lookback;
  const std::size_t steps = snap.steps() - nt;
  const auto z0 = model.encode(snap.scaled().columns(0, nt));
  const auto truth = test_truth(snap, nt);
  auto r = fc::autoregressive_rollout([&](const nn::Tensor2& w) { return f.predict(w); }, z0, steps,
                                      physical_decoder(model, snap.scaler), &truth);
  io::write_matrix(L.rollout() / "prediction.romf", r.expanded);
  io::write_matrix(L.rollout() / "latent.romf", r.latent);
  io::write_file_atomic(L.rollout() / "error_curve.csv", curve_csv(nt + 1, r.step_error));
  RolloutSummary s = summarize(r.step_error, nt, r.latent.cols());
  s.truncated_at = r.truncated_at;
  write_json(L.rollout() / "summary.json", s.to_json());
  return s;
}

RolloutSummary uq_rollout(const RunConfig& config) {
  if (!config.ensemble) throw ConfigError("ensemble: section is required for uq-rollout");
  const auto& spec = *config.ensemble;
  const auto snap = load_data(config);
  auto model = load_ae(config);
  const Layout L{config.out};
  io::require_exists(L.ensemble() / "manifest.json", "ensemble manifest (run `romf train-ensemble` first)");
  auto members = uq::load_ensemble(L.ensemble(), &spec);
  const std::size_t nt = spec.forecaster.lookback;
  const std::size_t steps = snap.steps() - nt;
  const auto z0 = model.encode(snap.scaled().columns(0, nt));
  const auto truth = test_truth(snap, nt);
  auto r = uq::uq_rollout(members, z0, steps, physical_decoder(model, snap.scaler), spec.ut_k, spec.feedback, &truth);
  io::write_matrix(L.uq() / "mean.romf", r.mean);
  io::write_matrix(L.uq() / "variance.romf", r.var);
  io::write_matrix(L.uq() / "latent_mean.romf", r.latent_mean);
  io::write_matrix(L.uq() / "latent_variance.romf", r.latent_var);
  io::write_file_atomic(L.uq() / "error_curve.csv", curve_csv(nt + 1, r.step_error));

  RolloutSummary s = summarize(r.step_error, nt, steps);
  std::vector<double> avg(r.var.rows(), 0.0);
  for (std::size_t i = 0; i < r.var.rows(); ++i) {
    for (std::size_t j = 0; j < r.var.cols(); ++j) avg[i] += r.var(i, j);
    avg[i] /= static_cast<double>(r.var.cols());
  }
  s.variance_argmax = static_cast<std::size_t>(std::max_element(avg.begin(), avg.end()) - avg.begin());
  nlohmann::json j = s.to_json();
  j["dropped"] = nlohmann::json::array();
  for (const auto& [member, step] : r.dropped) j["dropped"].push_back({{"member", member}, {"step", step}});
  write_json(L.uq() / "summary.json", j);
  io::write_file_atomic(L.uq() / "time_averaged_variance.csv", metrics::columns_to_csv({"node", "variance"}, {
      [&] {
        std::vector<double> n(avg.size());
        for (std::size_t i = 0; i < n.size(); ++i) n[i] = static_cast<double>(i);
        return n;
      }(),
      avg}));

  // Mean +/- 2 sigma bands at the export steps.
  for (std::size_t step : config.export_steps) {
    if (step <= nt) continue;
    const std::size_t c = step - 1 - nt;
    metrics::LineSeries truth_s{"truth", snap.grid, truth.column(c), {}};
    std::vector<double> band(r.var.rows());
    for (std::size_t i = 0; i < band.size(); ++i) band[i] = 2.0 * std::sqrt(r.var(i, c));
    metrics::LineSeries mean_s{"ensemble mean", snap.grid, r.mean.column(c), band};
    metrics::export_lineplot(L.uq() / ("band_step_" + std::to_string(step)), {truth_s, mean_s},
                             "Ensemble prediction at step " + std::to_string(step), "x", "u");
  }
  return s;
}

metrics::MetricReport evaluate(const RunConfig& config, const std::optional<fs::path>& pred,
                               const std::optional<fs::path>& truth) {
  const Layout L{config.out};
  const fs::path pred_path = pred.value_or(L.rollout() / "prediction.romf");
  io::require_exists(pred_path, "prediction matrix");
  const nn::Tensor2 p = io::read_matrix(pred_path);
  nn::Tensor2 t;
  if (truth) {
    io::require_exists(*truth, "truth matrix");
    t = io::read_matrix(*truth);
  } else {
    t = test_truth(load_data(config), config.forecaster.lookback);
  }
  if (p.rows() != t.rows() || p.cols() != t.cols()) {
    throw ShapeError("prediction is " + std::to_string(p.rows()) + "x" + std::to_string(p.cols()) + " but truth is " +
                     std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  }
  const auto report = metrics::evaluate(t, p);
  write_json(L.evaluation() / "report.json", metrics::to_json(report));
  const auto curve = metrics::error_curve(t, p);
  io::write_file_atomic(L.evaluation() / "report.csv",
                        metrics::columns_to_csv({"mse", "mae", "relative_l2"}, {{report.mse}, {report.mae}, {report.relative_l2}}));
  io::write_file_atomic(L.evaluation() / "error_curve.csv", curve_csv(1, curve));
  return report;
}

std::vector<fs::path> export_figures(const RunConfig& config) {
  const auto snap = load_data(config);
  const Layout L{config.out};
  const fs::path dir = L.figures();
  std::vector<fs::path> written;
  auto heat = [&](const std::string& name, const nn::Tensor2& m, const std::string& title) {
    metrics::export_heatmap(dir / name, m, title);
    written.push_back(dir / (name + ".svg"));
  };
  heat("truth", snap.values, "Ground truth");

  struct Prediction {
    std::string name, label;
    nn::Tensor2 values;
    std::size_t lookback;
  };
  std::vector<Prediction> preds;
  if (fs::exists(L.rollout() / "prediction.romf")) {
    preds.push_back({"rollout", fc::to_string(config.forecaster.type), io::read_matrix(L.rollout() / "prediction.romf"),
                     config.forecaster.lookback});
  }
  if (config.ensemble && fs::exists(L.uq() / "mean.romf")) {
    preds.push_back({"uq", "ensemble mean", io::read_matrix(L.uq() / "mean.romf"), config.ensemble->forecaster.lookback});
  }
  if (preds.empty()) throw MissingArtifactError("no rollout found under " + config.out.string() + " (run `romf rollout` first)");

  for (const auto& p : preds) {
    const auto truth = test_truth(snap, p.lookback);
    if (p.values.rows() != truth.rows() || p.values.cols() != truth.cols()) {
      throw ShapeError(p.name + " prediction shape does not match the stored snapshots");
    }
    nn::Tensor2 err(truth.rows(), truth.cols());
    for (std::size_t i = 0; i < err.rows(); ++i)
      for (std::size_t j = 0; j < err.cols(); ++j) err(i, j) = std::abs(truth(i, j) - p.values(i, j));
    heat(p.name + "_prediction", p.values, "Prediction (" + p.label + ")");
    heat(p.name + "_abs_error", err, "Absolute error (" + p.label + ")");
  }

  for (std::size_t step : config.export_steps) {
    std::vector<metrics::LineSeries> series{{"truth", snap.grid, snap.values.column(step - 1), {}}};
    for (const auto& p : preds)
      if (step > p.lookback) series.push_back({p.label, snap.grid, p.values.column(step - 1 - p.lookback), {}});
    const std::string name = "snapshot_step_" + std::to_string(step);
    metrics::export_lineplot(dir / name, series, "Time step " + std::to_string(step), "x", "u");
    written.push_back(dir / (name + ".svg"));
  }
  return written;
}

}  // namespace romf::pipeline
