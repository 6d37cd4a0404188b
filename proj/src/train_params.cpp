#include "romf/train_params.hpp"

#include <string>

#include "romf/config_reader.hpp"

namespace romf {

void TrainParams::validate(const char* where) const {
  const std::string w(where);
  if (epochs < 1) throw ConfigError(w + ".epochs must be >= 1");
  if (batch_size < 1) throw ConfigError(w + ".batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError(w + ".lr must be positive");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw ConfigError(w + ".lr_final_fraction must lie in (0, 1]");
  }
}

void to_json(nlohmann::json& j, const TrainParams& p) {
  j = {{"epochs", p.epochs},
       {"batch_size", p.batch_size},
       {"lr", p.lr},
       {"lr_final_fraction", p.lr_final_fraction},
       {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, TrainParams& p) {
  ConfigReader r(j, "");
  r.read("epochs", p.epochs).read("batch_size", p.batch_size).read("lr", p.lr);
  r.read("lr_final_fraction", p.lr_final_fraction).read("seed", p.seed);
  r.finish();
}

nlohmann::json history_to_json(const nn::TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) epochs.push_back({e.epoch, e.train_loss, e.val_loss});
  return {{"best_epoch", h.best_epoch}, {"best_val_loss", h.best_val_loss}, {"epochs", epochs}};
}

nn::TrainHistory history_from_json(const nlohmann::json& j) {
  nn::TrainHistory h;
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  h.best_val_loss = j.at("best_val_loss").get<double>();
  for (const auto& e : j.at("epochs")) {
    h.epochs.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>(), e.at(2).get<double>()});
  }
  return h;
}

}  // namespace romf
