// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "evd/error.hpp"
#include "evd/swin.hpp"

namespace evd::detail {

using json = nlohmann::json;

/// Rejects any key of `obj` outside `allowed`, naming the key and section.
inline void require_known_keys(const json& obj, std::string_view section,
                               std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw ConfigError(section.empty() ? std::string("config must be a JSON object")
                                      : "config section '" + std::string(section) + "' must be an object");
  }
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) {
      const auto name = section.empty() ? key : std::string(section) + "." + key;
      throw ConfigError("unknown config key '" + name + "'");
    }
  }
}

template <class T>
void read_key(const json& obj, std::string_view section, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(section) + "." + key + "' has the wrong type");
  }
}

inline json model_config_to_json(const swin::ModelConfig& c) {
  return json{{"s", c.s},         {"C", c.C},         {"stages", c.stages},       {"depth", c.depth},
              {"window", c.window}, {"heads", c.heads}, {"mlp_ratio", c.mlp_ratio}, {"seed", c.seed}};
}

inline swin::ModelConfig model_config_from_json(const json& j, swin::ModelConfig c = {}) {
  if (j.contains("preset")) {
    const auto seed = c.seed;
    c = swin::preset(j.at("preset").get<std::string>());
    c.seed = seed;
  }
  require_known_keys(j, "model",
                     {"preset", "s", "C", "stages", "depth", "window", "heads", "mlp_ratio", "seed"});
  read_key(j, "model", "s", c.s);
  read_key(j, "model", "C", c.C);
  read_key(j, "model", "stages", c.stages);
  read_key(j, "model", "depth", c.depth);
  read_key(j, "model", "window", c.window);
  read_key(j, "model", "heads", c.heads);
  read_key(j, "model", "mlp_ratio", c.mlp_ratio);
  read_key(j, "model", "seed", c.seed);
  return c;
}

}  // namespace evd::detail
