// romf: config-driven pipeline front end. Exit codes: 0 ok, 1 other failure,
// 2 config, 3 missing artifact, 4 data/shape mismatch, 5 numeric failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "romf/error.hpp"
#include "romf/pipeline.hpp"

namespace {

using romf::pipeline::RunConfig;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("--seed", c.seed, "override every training seed");
  cmd->add_option("--jobs", c.jobs, "parallel ensemble members")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = romf::pipeline::load_config(c.config);
  if (c.seed) cfg.override_seed(*c.seed);
  if (c.out) cfg.out = *c.out;
  cfg.validate();
  return cfg;
}

std::size_t job_cap(std::size_t jobs) {
  if (const char* env = std::getenv("ROMF_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) jobs = std::min<std::size_t>(jobs, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      throw romf::ConfigError("ROMF_THREADS must be a positive integer");
    }
  }
  return jobs;
}

void print_summary(const romf::pipeline::RolloutSummary& s) { std::cout << s.to_json().dump() << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order modelling with autoencoders, latent forecasters and ensemble UQ"};
  app.require_subcommand(1);
  Common c;
  std::optional<std::string> pred, truth;

  auto* gen = app.add_subcommand("generate", "write the snapshot matrix");
  auto* tae = app.add_subcommand("train-ae", "train the autoencoder");
  auto* tfc = app.add_subcommand("train-forecaster", "train the latent forecaster");
  auto* tens = app.add_subcommand("train-ensemble", "train the variance-informed ensemble");
  auto* roll = app.add_subcommand("rollout", "autoregressive rollout of the forecaster");
  auto* uqr = app.add_subcommand("uq-rollout", "ensemble rollout with unscented decoding");
  auto* eval = app.add_subcommand("evaluate", "metrics of a prediction against truth");
  auto* exp = app.add_subcommand("export", "heat maps and snapshot plots");
  for (auto* cmd : {gen, tae, tfc, tens, roll, uqr, eval, exp}) add_common(cmd, c);
  eval->add_option("--pred", pred, "prediction matrix (default: rollout/prediction.romf)");
  eval->add_option("--truth", truth, "truth matrix (default: test window of the snapshots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = resolve(c);
    namespace pl = romf::pipeline;
    if (gen->parsed()) {
      const auto s = pl::generate(cfg);
      std::cout << "wrote " << (pl::Layout{cfg.out}.snapshots().string() + ".romf") << " (" << s.nodes() << "x"
                << s.steps() << ")\n";
    } else if (tae->parsed()) {
      pl::train_ae(cfg, &std::cout);
    } else if (tfc->parsed()) {
      pl::train_forecaster(cfg, &std::cout);
    } else if (tens->parsed()) {
      pl::train_ensemble(cfg, job_cap(c.jobs), &std::cout);
    } else if (roll->parsed()) {
      print_summary(pl::rollout(cfg));
    } else if (uqr->parsed()) {
      print_summary(pl::uq_rollout(cfg));
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> p, t;
      if (pred) p = *pred;
      if (truth) t = *truth;
      std::cout << romf::metrics::to_json(pl::evaluate(cfg, p, t)).dump() << '\n';
    } else if (exp->parsed()) {
      for (const auto& f : pl::export_figures(cfg)) std::cout << f.string() << '\n';
    }
  } catch (const romf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const romf::MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << '\n';
    return 3;
  } catch (const romf::ShapeError& e) {
    std::cerr << "data mismatch: " << e.what() << '\n';
    return 4;
  } catch (const romf::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
