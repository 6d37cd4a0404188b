#pragma once

#include <cstddef>
#include <cstdint>

#include <json.hpp>

#include "romf/nn/optim.hpp"

namespace romf {

/// Serializable subset of nn::TrainOptions.
struct TrainParams {
  std::size_t epochs = 100;
  std::size_t batch_size = 15;
  double lr = 1e-3;
  double lr_final_fraction = 1.0;
  std::uint64_t seed = 0;

  nn::TrainOptions options() const {
    nn::TrainOptions o;
    o.epochs = epochs;
    o.batch_size = batch_size;
    o.lr = lr;
    o.lr_final_fraction = lr_final_fraction;
    o.seed = seed;
    return o;
  }
  void validate(const char* where) const;
};

void to_json(nlohmann::json& j, const TrainParams& p);
void from_json(const nlohmann::json& j, TrainParams& p);

nlohmann::json history_to_json(const nn::TrainHistory& h);
nn::TrainHistory history_from_json(const nlohmann::json& j);

}  // namespace romf
