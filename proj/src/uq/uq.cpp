#include "romf/uq.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "romf/checkpoint.hpp"
#include "romf/config_reader.hpp"
#include "romf/error.hpp"
#include "romf/evalmetrics.hpp"
#include "romf/io.hpp"
#include "romf/log.hpp"
#include "romf/nn/activation.hpp"

namespace romf::uq {

NllResult nll(std::span<const double> mu, std::span<const double> rho, std::span<const double> target) {
  if (mu.size() != rho.size() || mu.size() != target.size() || mu.empty()) {
    throw ShapeError("nll: mu, rho and target must be non-empty and equally long");
  }
  const double n = static_cast<double>(mu.size());
  NllResult r;
  r.d_mu.resize(mu.size());
  r.d_rho.resize(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double s2 = nn::softplus(rho[i]) + kVarianceFloor;
    const double e = target[i] - mu[i];
    r.value += 0.5 * std::log(s2) + e * e / (2.0 * s2);
    r.d_mu[i] = -e / s2 / n;
    const double d_s2 = 0.5 / s2 - e * e / (2.0 * s2 * s2);
    r.d_rho[i] = d_s2 * nn::sigmoid(rho[i]) / n;
  }
  r.value /= n;
  if (!std::isfinite(r.value)) throw NumericError("nll: non-finite loss");
  return r;
}

nn::LossResult nll_loss(const nn::Batch& pred, const nn::Batch& target) {
  if (pred.channels() != 2 || target.channels() != 1 || pred.samples() != target.samples() ||
      pred.length() != target.length()) {
    throw ShapeError("nll_loss: prediction " + pred.shape_string() + " needs 2 channels matching target " +
                     target.shape_string());
  }
  const std::size_t B = pred.samples(), m = pred.length();
  std::vector<double> mu(B * m), rho(B * m);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < m; ++i) {
      mu[b * m + i] = pred.at(b, 0, i);
      rho[b * m + i] = pred.at(b, 1, i);
    }
  const NllResult r = nll(mu, rho, target.data());
  nn::LossResult out{r.value, nn::Batch(B, 2, m)};
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < m; ++i) {
      out.grad.at(b, 0, i) = r.d_mu[b * m + i];
      out.grad.at(b, 1, i) = r.d_rho[b * m + i];
    }
  return out;
}

void EnsembleSpec::validate() const {
  if (members < 1) throw ConfigError("ensemble.members must be >= 1");
  if (!forecaster.dual_head) throw ConfigError("ensemble.forecaster must have dual_head = true");
  forecaster.validate();
  if (!(static_cast<double>(forecaster.latent) + ut_k > 0.0)) {
    throw ConfigError("ensemble.ut_k: m + k must be positive");
  }
}

void to_json(nlohmann::json& j, const EnsembleSpec& s) {
  j = {{"members", s.members},
       {"base_seed", s.base_seed},
       {"forecaster", s.forecaster},
       {"feedback", s.feedback == Feedback::MemberMean ? "member" : "ensemble"},
       {"ut_k", s.ut_k}};
}

void from_json(const nlohmann::json& j, EnsembleSpec& s) {
  ConfigReader r(j, "ensemble");
  r.read("members", s.members).read("base_seed", s.base_seed).read("ut_k", s.ut_k);
  if (r.has("forecaster")) {
    nlohmann::json f = r.at("forecaster");
    if (!f.contains("dual_head")) f["dual_head"] = true;
    s.forecaster = f.get<fc::ForecasterSpec>();
  }
  std::string fb = s.feedback == Feedback::MemberMean ? "member" : "ensemble";
  r.read("feedback", fb);
  if (fb == "member") {
    s.feedback = Feedback::MemberMean;
  } else if (fb == "ensemble") {
    s.feedback = Feedback::EnsembleMean;
  } else {
    throw ConfigError("ensemble.feedback must be 'member' or 'ensemble'");
  }
  r.finish();
  s.validate();
}

std::vector<fc::Forecaster> ensemble_train(
    const nn::Tensor2& latents, const data::WindowSplits& windows, const EnsembleSpec& spec,
    const TrainParams& params, std::size_t jobs, std::vector<MemberReport>* reports,
    std::function<void(std::size_t, const nn::EpochRecord&)> on_epoch) {
  spec.validate();
  const std::size_t M = spec.members;
  std::vector<std::optional<fc::Forecaster>> slots(M);
  std::vector<MemberReport> rep(M);
  std::vector<std::exception_ptr> errors(M);
  std::mutex log_mutex;

  auto train_member = [&](std::size_t i) {
    TrainParams p = params;
    p.seed = spec.member_seed(i);
    rep[i] = {i, p.seed, false};
    auto cb = [&, i](const nn::EpochRecord& e) {
      if (!on_epoch) return;
      std::lock_guard lock(log_mutex);
      on_epoch(i, e);
    };
    try {
      slots[i].emplace(fc::train_forecaster(latents, windows, spec.forecaster, p, nll_loss, cb));
    } catch (const NumericError& e) {
      warn("ensemble member " + std::to_string(i) + " diverged (" + e.what() + "); retrying with seed " +
           std::to_string(p.seed + 1000));
      p.seed += 1000;
      rep[i] = {i, p.seed, true};
      slots[i].emplace(fc::train_forecaster(latents, windows, spec.forecaster, p, nll_loss, cb));
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < M; i = next++) {
      try {
        train_member(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, M));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<fc::Forecaster> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  if (reports) *reports = rep;
  return out;
}

GaussianLatent ensemble_aggregate(const std::vector<GaussianLatent>& members) {
  if (members.empty()) throw ConfigError("ensemble_aggregate: no members");
  const std::size_t m = members.front().mean.size();
  for (const auto& g : members) {
    if (g.mean.size() != m || g.var.size() != m) throw ShapeError("ensemble_aggregate: ragged members");
  }
  const double M = static_cast<double>(members.size());
  GaussianLatent out{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0)};
  for (const auto& g : members)
    for (std::size_t i = 0; i < m; ++i) {
      out.mean[i] += g.mean[i];
      out.var[i] += g.var[i] + g.mean[i] * g.mean[i];
    }
  bool clamped = false;
  for (std::size_t i = 0; i < m; ++i) {
    out.mean[i] /= M;
    out.var[i] = out.var[i] / M - out.mean[i] * out.mean[i];
    if (out.var[i] < 0.0) {
      out.var[i] = 0.0;
      clamped = true;
    }
  }
  if (clamped) warn("ensemble_aggregate: negative variance from rounding clamped to 0");
  return out;
}

SigmaPointSet sigma_points(const GaussianLatent& latent, double k) {
  const std::size_t m = latent.mean.size();
  if (m == 0 || latent.var.size() != m) throw ShapeError("sigma_points: mean and variance lengths differ");
  const double mk = static_cast<double>(m) + k;
  if (!(mk > 0.0)) throw ConfigError("sigma_points: m + k must be positive");
  SigmaPointSet s;
  s.k = k;
  s.points = nn::Tensor2(m, 2 * m + 1);
  s.weights.assign(2 * m + 1, 1.0 / (2.0 * mk));
  s.weights[0] = k / mk;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < 2 * m + 1; ++c) s.points(i, c) = latent.mean[i];
  for (std::size_t i = 0; i < m; ++i) {
    if (latent.var[i] < 0.0) throw NumericError("sigma_points: negative variance");
    const double d = std::sqrt(mk * latent.var[i]);
    s.points(i, 1 + 2 * i) += d;
    s.points(i, 2 + 2 * i) -= d;
  }
  return s;
}

GaussianField ut_transform(const SigmaPointSet& points, const fc::DecodeFn& decode) {
  nn::Tensor2 y;
  try {
    y = decode(points.points);
  } catch (const Error& e) {
    throw NumericError(std::string("ut_transform: decoding sigma points failed: ") + e.what());
  }
  if (y.cols() != points.points.cols()) throw ShapeError("ut_transform: decoder changed the point count");
  for (std::size_t c = 0; c < y.cols(); ++c)
    for (std::size_t r = 0; r < y.rows(); ++r)
      if (!std::isfinite(y(r, c))) {
        throw NumericError("ut_transform: decoder produced non-finite output for sigma point " +
                           std::to_string(c));
      }
  const std::size_t n = y.rows();
  GaussianField f{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = y.row(r);
    double mu = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) mu += points.weights[c] * row[c];
    double var = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) var += points.weights[c] * (row[c] - mu) * (row[c] - mu);
    f.mean[r] = mu;
    f.var[r] = var;
  }
  return f;
}

UqRolloutResult uq_rollout(std::vector<fc::Forecaster>& members, const nn::Tensor2& seed_window,
                           std::size_t steps, const fc::DecodeFn& decode, double k, Feedback feedback,
                           const nn::Tensor2* truth) {
  if (members.empty()) throw ConfigError("uq_rollout: empty ensemble");
  const std::size_t m = seed_window.rows(), nt = seed_window.cols();
  const std::size_t M = members.size();
  for (auto& f : members) {
    if (!f.spec().dual_head || f.spec().latent != m || f.spec().lookback != nt) {
      throw ShapeError("uq_rollout: member spec does not match the seed window");
    }
  }
  // One history per member (member-mean feedback) or a single shared one.
  const std::size_t H = feedback == Feedback::MemberMean ? M : 1;
  std::vector<nn::Tensor2> hist(H, nn::Tensor2(m, nt + steps));
  for (auto& h : hist)
    for (std::size_t t = 0; t < nt; ++t) h.set_column(t, seed_window.column(t));
  std::vector<bool> alive(M, true);

  UqRolloutResult r;
  r.latent_mean = nn::Tensor2(m, steps);
  r.latent_var = nn::Tensor2(m, steps);
  std::vector<double> mu, var;
  for (std::size_t j = 0; j < steps; ++j) {
    std::vector<GaussianLatent> outs;
    std::vector<std::size_t> who;
    for (std::size_t i = 0; i < M; ++i) {
      if (!alive[i]) continue;
      nn::Tensor2& h = hist[H == M ? i : 0];
      members[i].predict(h.columns(j, nt), mu, var);
      GaussianLatent g{mu, var};
      bool finite = true;
      for (std::size_t q = 0; q < m; ++q) finite = finite && std::isfinite(g.mean[q]) && std::isfinite(g.var[q]);
      if (!finite) {
        alive[i] = false;
        r.dropped.emplace_back(i, j);
        warn("uq_rollout: member " + std::to_string(i) + " diverged at step " + std::to_string(j) +
             "; dropped from aggregation");
        continue;
      }
      outs.push_back(std::move(g));
      who.push_back(i);
    }
    if (outs.empty()) throw NumericError("uq_rollout: every member diverged by step " + std::to_string(j));
    const GaussianLatent agg = ensemble_aggregate(outs);
    if (H == M) {
      for (std::size_t q = 0; q < who.size(); ++q) hist[who[q]].set_column(nt + j, outs[q].mean);
    } else {
      hist[0].set_column(nt + j, agg.mean);
    }
    r.latent_mean.set_column(j, agg.mean);
    r.latent_var.set_column(j, agg.var);
  }
  for (std::size_t j = 0; j < steps; ++j) {
    const GaussianLatent g{r.latent_mean.column(j), r.latent_var.column(j)};
    const GaussianField f = ut_transform(sigma_points(g, k), decode);
    if (j == 0) {
      r.mean = nn::Tensor2(f.mean.size(), steps);
      r.var = nn::Tensor2(f.mean.size(), steps);
    }
    r.mean.set_column(j, f.mean);
    r.var.set_column(j, f.var);
  }
  if (truth && steps > 0) r.step_error = metrics::error_curve(truth->columns(0, steps), r.mean);
  return r;
}

void save_ensemble(const std::filesystem::path& dir, const EnsembleSpec& spec,
                   const std::vector<fc::Forecaster>& members, const std::vector<MemberReport>& reports) {
  nlohmann::json manifest = {{"format", "romf-ensemble"}, {"version", 1}, {"spec", spec},
                             {"spec_hash", spec_hash(spec)}, {"members", nlohmann::json::array()}};
  for (std::size_t i = 0; i < members.size(); ++i) {
    const std::string file = "member_" + std::to_string(i) + ".ckpt";
    members[i].save(dir / file);
    nlohmann::json entry = {{"file", file}, {"seed", members[i].seed()}};
    if (i < reports.size()) entry["retried"] = reports[i].retried;
    manifest["members"].push_back(entry);
  }
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<fc::Forecaster> load_ensemble(const std::filesystem::path& dir, const EnsembleSpec* expected) {
  const auto path = dir / "manifest.json";
  io::require_exists(path, "ensemble manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "romf-ensemble") throw IoError(path.string() + ": not an ensemble manifest");
  if (expected && manifest.value("spec_hash", "") != spec_hash(*expected)) {
    throw ConfigError(path.string() + ": ensemble spec hash does not match the configured ensemble");
  }
  std::vector<fc::Forecaster> out;
  for (const auto& e : manifest.at("members")) out.push_back(fc::Forecaster::load(dir / e.at("file").get<std::string>()));
  return out;
}

}  // namespace romf::uq
