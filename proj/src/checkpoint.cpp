#include "romf/checkpoint.hpp"

#include <cstdint>
#include <cstdio>

#include "romf/error.hpp"
#include "romf/io.hpp"

namespace romf {

std::string spec_hash(const nlohmann::json& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : spec.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                     const nn::ParamStore& params) {
  if (!header.contains("spec")) throw StateError("checkpoint header needs a spec");
  header["format"] = "romf-checkpoint";
  header["version"] = kCheckpointVersion;
  header["spec_hash"] = spec_hash(header["spec"]);
  header["param_count"] = params.size();
  header["buffer_count"] = params.flat_buffers().size();
  std::string out = header.dump();
  out.push_back('\n');
  const auto& v = params.flat_values();
  const auto& b = params.flat_buffers();
  out += io::encode_matrix(nn::Tensor2(1, v.size(), v));
  out += io::encode_matrix(nn::Tensor2(1, b.size(), b));
  io::write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  io::require_exists(path, "checkpoint");
  const std::string bytes = io::read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw IoError(path.string() + ": not a checkpoint");
  Checkpoint c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (c.header.value("format", "") != "romf-checkpoint") {
    throw IoError(path.string() + ": not a checkpoint");
  }
  if (c.header.value("version", 0) != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version");
  }
  std::size_t offset = nl + 1;
  const nn::Tensor2 v = io::decode_matrix(bytes, offset);
  const nn::Tensor2 b = io::decode_matrix(bytes, offset);
  c.values.assign(v.data().begin(), v.data().end());
  c.buffers.assign(b.data().begin(), b.data().end());
  if (c.header.value("spec_hash", "") != spec_hash(c.header.at("spec"))) {
    throw IoError(path.string() + ": checkpoint spec hash does not match its spec");
  }
  return c;
}

void check_spec(const Checkpoint& ckpt, const nlohmann::json& expected_spec,
                const std::string& what) {
  const std::string want = spec_hash(expected_spec);
  const std::string have = ckpt.header.value("spec_hash", "");
  if (want != have) {
    throw ConfigError(what + ": checkpoint spec hash " + have + " does not match configured spec " +
                      want + "; retrain or fix the config");
  }
}

void restore_params(const Checkpoint& ckpt, nn::ParamStore& params) {
  if (ckpt.values.size() != params.size() || ckpt.buffers.size() != params.flat_buffers().size()) {
    throw ShapeError("checkpoint holds " + std::to_string(ckpt.values.size()) + " parameters and " +
                     std::to_string(ckpt.buffers.size()) + " buffers; model needs " +
                     std::to_string(params.size()) + " and " +
                     std::to_string(params.flat_buffers().size()));
  }
  params.flat_values() = ckpt.values;
  params.flat_buffers() = ckpt.buffers;
}

}  // namespace romf
