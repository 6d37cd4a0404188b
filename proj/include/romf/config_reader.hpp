#pragma once

#include <set>
#include <string>
#include <utility>

#include <json.hpp>

#include "romf/error.hpp"

namespace romf {

/// Reads optional fields of a JSON object into typed values, keeping
/// defaults for absent keys. Type mismatches and, on finish(), unknown keys
/// raise ConfigError with the dotted field path.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected a JSON object");
  }

  template <typename T>
  ConfigReader& read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return *this;
    try {
      out = it->template get<T>();
    } catch (const ConfigError& e) {
      throw ConfigError(field(key) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
    return *this;
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const nlohmann::json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(field(key) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "" : path_ + ": "; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace romf
