// Copyright Contributors to the evdemosaic project.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "evd/config.hpp"
#include "json_util.hpp"

namespace evd {

namespace {

using detail::json;
using detail::read_key;
using detail::require_known_keys;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

enum class LossKind { Charbonnier, Power, Exp };

LossKind loss_kind(std::string_view name) {
  const auto n = lower(trim(name));
  if (n == "charbonnier") return LossKind::Charbonnier;
  if (n == "pixel_focus_power" || n == "pf_power") return LossKind::Power;
  if (n == "pixel_focus_exp" || n == "pf_exp") return LossKind::Exp;
  throw ParameterError("unknown loss '" + std::string(name) +
                       "' (expected charbonnier, pixel_focus_power or pixel_focus_exp)");
}

loss::LossSpec default_spec(LossKind k) {
  switch (k) {
    case LossKind::Charbonnier: return loss::Charbonnier{};
    case LossKind::Power: return loss::PixelFocusPower{};
    case LossKind::Exp: break;
  }
  return loss::PixelFocusExp{};
}

// Field pointer for a parameter name, or nullptr when the loss has no such field.
double* loss_field(loss::LossSpec& spec, std::string_view key) {
  if (auto* c = std::get_if<loss::Charbonnier>(&spec)) return key == "eps" ? &c->eps : nullptr;
  if (auto* p = std::get_if<loss::PixelFocusPower>(&spec)) {
    if (key == "a") return &p->a;
    if (key == "b") return &p->b;
    if (key == "g") return &p->g;
    return nullptr;
  }
  auto& e = std::get<loss::PixelFocusExp>(spec);
  return key == "lambda" ? &e.lambda : nullptr;
}

loss::LossSpec loss_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config section 'loss' must be an object");
  if (!j.contains("type")) throw ConfigError("config key 'loss.type' is required");
  loss::LossSpec spec;
  try {
    spec = default_spec(loss_kind(j.at("type").get<std::string>()));
  } catch (const json::exception&) {
    throw ConfigError("config key 'loss.type' has the wrong type");
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("config key 'loss.type': ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "type") continue;
    double* field = loss_field(spec, key);
    if (!field) throw ConfigError("unknown config key 'loss." + key + "'");
    if (!value.is_number()) throw ConfigError("config key 'loss." + key + "' has the wrong type");
    *field = value.get<double>();
  }
  return spec;
}

json loss_to_json(const loss::LossSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, loss::Charbonnier>) {
          return {{"type", "charbonnier"}, {"eps", s.eps}};
        } else if constexpr (std::is_same_v<T, loss::PixelFocusPower>) {
          return {{"type", "pixel_focus_power"}, {"a", s.a}, {"b", s.b}, {"g", s.g}};
        } else {
          return {{"type", "pixel_focus_exp"}, {"lambda", s.lambda}};
        }
      },
      spec);
}

train::TrainConfig train_from_json(const json& j) {
  train::TrainConfig c;
  if (j.contains("preset")) {
    const auto name = lower(j.at("preset").get<std::string>());
    if (name == "desk") {
      c = train::TrainConfig::desk();
    } else if (name != "paper") {
      throw ConfigError("config key 'train.preset' must be 'desk' or 'paper', got '" + name + "'");
    }
  }
  require_known_keys(j, "train",
                     {"preset", "stage1_epochs", "stage2_epochs", "lr1_init", "lr2_init", "crop", "batch", "seed",
                      "beta1", "beta2", "epsilon", "charbonnier_eps", "lambda_cap", "checkpoint_every", "grad_clip",
                      "eval_every"});
  read_key(j, "train", "stage1_epochs", c.stage1_epochs);
  read_key(j, "train", "stage2_epochs", c.stage2_epochs);
  read_key(j, "train", "lr1_init", c.lr1_init);
  read_key(j, "train", "lr2_init", c.lr2_init);
  read_key(j, "train", "crop", c.crop);
  read_key(j, "train", "batch", c.batch);
  read_key(j, "train", "seed", c.seed);
  read_key(j, "train", "beta1", c.adam.beta1);
  read_key(j, "train", "beta2", c.adam.beta2);
  read_key(j, "train", "epsilon", c.adam.epsilon);
  read_key(j, "train", "charbonnier_eps", c.charbonnier_eps);
  read_key(j, "train", "lambda_cap", c.lambda_cap);
  read_key(j, "train", "checkpoint_every", c.checkpoint_every);
  read_key(j, "train", "grad_clip", c.grad_clip);
  read_key(j, "train", "eval_every", c.eval_every);
  return c;
}

json train_to_json(const train::TrainConfig& c) {
  return {{"stage1_epochs", c.stage1_epochs},
          {"stage2_epochs", c.stage2_epochs},
          {"lr1_init", c.lr1_init},
          {"lr2_init", c.lr2_init},
          {"crop", c.crop},
          {"batch", c.batch},
          {"seed", c.seed},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"charbonnier_eps", c.charbonnier_eps},
          {"lambda_cap", c.lambda_cap},
          {"checkpoint_every", c.checkpoint_every},
          {"grad_clip", c.grad_clip},
          {"eval_every", c.eval_every}};
}

}  // namespace

loss::LossSpec parse_loss_spec(std::string_view text) {
  text = trim(text);
  const auto open = text.find_first_of(":(");
  loss::LossSpec spec = default_spec(loss_kind(text.substr(0, open)));
  if (open == std::string_view::npos) return spec;
  std::string_view args = text.substr(open + 1);
  if (text[open] == '(') {
    if (args.empty() || args.back() != ')') throw ParameterError("unbalanced parenthesis in loss '" + std::string(text) + "'");
    args.remove_suffix(1);
  }
  while (!args.empty()) {
    const auto sep = args.find_first_of(",;");
    const auto item = trim(args.substr(0, sep));
    args = sep == std::string_view::npos ? std::string_view{} : args.substr(sep + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ParameterError("expected key=value in loss '" + std::string(text) + "'");
    const auto key = trim(item.substr(0, eq));
    double* field = loss_field(spec, key);
    if (!field) throw ParameterError("loss '" + std::string(text) + "' has no parameter '" + std::string(key) + "'");
    const std::string value(trim(item.substr(eq + 1)));
    std::size_t used = 0;
    try {
      *field = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) {
      throw ParameterError("bad value '" + value + "' for loss parameter '" + std::string(key) + "'");
    }
  }
  return spec;
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_known_keys(j, "", {"model", "train", "loss", "dataset", "out"});
  RunConfig rc;
  rc.train = train::TrainConfig::desk();
  if (j.contains("model")) rc.model = detail::model_config_from_json(j.at("model"), rc.model);
  if (j.contains("train")) rc.train = train_from_json(j.at("train"));
  if (j.contains("loss")) rc.train.stage2_loss = loss_from_json(j.at("loss"));
  const auto path_key = [&](const char* key, std::filesystem::path& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_string()) throw ConfigError(std::string("config key '") + key + "' must be a string");
    std::filesystem::path p = j.at(key).get<std::string>();
    out = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };
  path_key("dataset", rc.dataset);
  path_key("out", rc.out);
  try {
    rc.model.validate();
    rc.train.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string dump_run_config(const RunConfig& c) {
  json j{{"model", detail::model_config_to_json(c.model)},
         {"train", train_to_json(c.train)},
         {"loss", loss_to_json(c.train.stage2_loss)},
         {"dataset", c.dataset.string()},
         {"out", c.out.string()}};
  return j.dump(2);
}

}  // namespace evd
