#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "romf/nn/param_store.hpp"

namespace romf {

inline constexpr int kCheckpointVersion = 1;

/// On disk: one line of compact JSON (the header), then the parameter
/// values and the non-trainable buffers as two 1-row ROMF matrices.
struct Checkpoint {
  nlohmann::json header;
  std::vector<double> values;
  std::vector<double> buffers;
};

/// 16 hex digits of the 64-bit FNV-1a hash of the spec's canonical dump.
std::string spec_hash(const nlohmann::json& spec);

/// `header` must carry a "spec" object; format, version and spec_hash are
/// filled in here.
void save_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                     const nn::ParamStore& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Refuses (ConfigError) when the stored spec hash differs from the hash of
/// `expected_spec`.
void check_spec(const Checkpoint& ckpt, const nlohmann::json& expected_spec,
                const std::string& what);
/// Copies stored values and buffers into `params` after a size check.
void restore_params(const Checkpoint& ckpt, nn::ParamStore& params);

}  // namespace romf
