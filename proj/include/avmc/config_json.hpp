#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "avmc/training.hpp"

namespace avmc {

namespace config_detail {

using nlohmann::json;

// Rejects unknown keys so typos fail before any training starts.
inline void expect_keys(const json& obj, std::initializer_list<const char*> allowed,
                        const std::string& ctx) {
  if (!obj.is_object()) throw ConfigError("config: '" + ctx + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("config: unknown key '" + (ctx.empty() ? key : ctx + "." + key) + "'");
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, const T& fallback) {
  return obj.contains(key) ? obj.at(key).get<T>() : fallback;
}

}  // namespace config_detail

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"hidden",
       {{"text", c.hidden.text}, {"acoustic", c.hidden.acoustic}, {"visual", c.hidden.visual}}},
      {"lstm_layers", c.lstm_layers},
      {"lstm_hidden", c.lstm_hidden},
      {"classifier_hidden", c.classifier_hidden},
      {"activation", to_string(c.activation)},
      {"dropout", c.dropout},
  };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& ctx = "model") {
  using config_detail::expect_keys;
  using config_detail::get_or;
  expect_keys(j, {"hidden", "lstm_layers", "lstm_hidden", "classifier_hidden", "activation",
                  "dropout"},
              ctx);
  ModelConfig c;
  if (j.contains("hidden")) {
    const auto& h = j.at("hidden");
    expect_keys(h, {"text", "acoustic", "visual"}, ctx + ".hidden");
    c.hidden.text = get_or(h, "text", c.hidden.text);
    c.hidden.acoustic = get_or(h, "acoustic", c.hidden.acoustic);
    c.hidden.visual = get_or(h, "visual", c.hidden.visual);
  }
  c.lstm_layers = get_or(j, "lstm_layers", c.lstm_layers);
  c.lstm_hidden = get_or(j, "lstm_hidden", c.lstm_hidden);
  if (j.contains("classifier_hidden")) {
    const auto& ch = j.at("classifier_hidden");
    if (!ch.is_array() || ch.size() != 2) {
      throw ConfigError("config: '" + ctx + ".classifier_hidden' must be a 2-element array");
    }
    c.classifier_hidden = {ch.at(0).get<int>(), ch.at(1).get<int>()};
  }
  if (j.contains("activation")) c.activation = activation_from_string(j.at("activation"));
  c.dropout = get_or(j, "dropout", c.dropout);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// LossWeights / MixupConfig / AdamConfig / AblationFlags
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LossWeights& w) {
  return nlohmann::json{
      {"alpha", {{"m", w.alpha.m}, {"t", w.alpha.t}, {"a", w.alpha.a}, {"v", w.alpha.v}}},
      {"beta", {{"a", w.beta.a}, {"v", w.beta.v}}},
  };
}

inline LossWeights loss_weights_from_json(const nlohmann::json& j, const std::string& ctx) {
  using config_detail::expect_keys;
  using config_detail::get_or;
  expect_keys(j, {"alpha", "beta"}, ctx);
  LossWeights w;
  if (j.contains("alpha")) {
    const auto& a = j.at("alpha");
    expect_keys(a, {"m", "t", "a", "v"}, ctx + ".alpha");
    w.alpha.m = get_or(a, "m", w.alpha.m);
    w.alpha.t = get_or(a, "t", w.alpha.t);
    w.alpha.a = get_or(a, "a", w.alpha.a);
    w.alpha.v = get_or(a, "v", w.alpha.v);
  }
  if (j.contains("beta")) {
    const auto& b = j.at("beta");
    expect_keys(b, {"a", "v"}, ctx + ".beta");
    w.beta.a = get_or(b, "a", w.beta.a);
    w.beta.v = get_or(b, "v", w.beta.v);
  }
  return w;
}

inline nlohmann::json to_json(const MixupConfig& c) {
  return nlohmann::json{
      {"beta_alpha", c.beta_alpha},
      {"granularity", "per_batch"},
      {"target_stop_gradient", c.target_stop_gradient},
  };
}

inline MixupConfig mixup_config_from_json(const nlohmann::json& j, const std::string& ctx) {
  using config_detail::expect_keys;
  using config_detail::get_or;
  expect_keys(j, {"beta_alpha", "granularity", "target_stop_gradient"}, ctx);
  MixupConfig c;
  c.beta_alpha = get_or(j, "beta_alpha", c.beta_alpha);
  if (j.contains("granularity") && j.at("granularity").get<std::string>() != "per_batch") {
    throw ConfigError("config: '" + ctx + ".granularity' must be 'per_batch'");
  }
  c.target_stop_gradient = get_or(j, "target_stop_gradient", c.target_stop_gradient);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const AdamConfig& c) {
  return nlohmann::json{{"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}};
}

inline AdamConfig adam_config_from_json(const nlohmann::json& j, const std::string& ctx) {
  using config_detail::expect_keys;
  using config_detail::get_or;
  expect_keys(j, {"beta1", "beta2", "eps"}, ctx);
  AdamConfig c;
  c.beta1 = get_or(j, "beta1", c.beta1);
  c.beta2 = get_or(j, "beta2", c.beta2);
  c.eps = get_or(j, "eps", c.eps);
  c.validate();
  return c;
}

inline nlohmann::json to_json(const AblationFlags& f) {
  return nlohmann::json{{"disable_mixup_a", f.disable_mixup_a},
                        {"disable_mixup_v", f.disable_mixup_v},
                        {"disable_unimodal_tasks", f.disable_unimodal_tasks}};
}

inline AblationFlags ablation_from_json(const nlohmann::json& j, const std::string& ctx) {
  using config_detail::expect_keys;
  using config_detail::get_or;
  expect_keys(j, {"disable_mixup_a", "disable_mixup_v", "disable_unimodal_tasks"}, ctx);
  AblationFlags f;
  f.disable_mixup_a = get_or(j, "disable_mixup_a", false);
  f.disable_mixup_v = get_or(j, "disable_mixup_v", false);
  f.disable_unimodal_tasks = get_or(j, "disable_unimodal_tasks", false);
  return f;
}

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TrainConfig& c) {
  return nlohmann::json{
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"max_epochs", c.max_epochs},
      {"early_stop_patience", c.early_stop_patience},
      {"grad_clip_norm", c.grad_clip_norm},
      {"optimizer", to_json(c.optimizer)},
      {"loss_weights", to_json(c.loss_weights)},
      {"mixup", to_json(c.mixup)},
      {"mode", to_string(c.mode)},
      {"ablation", to_json(c.ablation)},
  };
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& ctx = "train") {
  using config_detail::expect_keys;
  using config_detail::get_or;
  expect_keys(j,
              {"batch_size", "learning_rate", "max_epochs", "early_stop_patience", "grad_clip_norm",
               "optimizer", "loss_weights", "mixup", "mode", "ablation"},
              ctx);
  TrainConfig c;
  c.batch_size = get_or(j, "batch_size", c.batch_size);
  c.learning_rate = get_or(j, "learning_rate", c.learning_rate);
  c.max_epochs = get_or(j, "max_epochs", c.max_epochs);
  c.early_stop_patience = get_or(j, "early_stop_patience", c.early_stop_patience);
  c.grad_clip_norm = get_or(j, "grad_clip_norm", c.grad_clip_norm);
  if (j.contains("optimizer")) c.optimizer = adam_config_from_json(j.at("optimizer"), ctx + ".optimizer");
  if (j.contains("loss_weights")) {
    c.loss_weights = loss_weights_from_json(j.at("loss_weights"), ctx + ".loss_weights");
  }
  if (j.contains("mixup")) c.mixup = mixup_config_from_json(j.at("mixup"), ctx + ".mixup");
  if (j.contains("mode")) c.mode = train_mode_from_string(j.at("mode"));
  if (j.contains("ablation")) c.ablation = ablation_from_json(j.at("ablation"), ctx + ".ablation");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// RunConfig: the single JSON document consumed by the CLI
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string archive;
  std::string output_dir;
  std::uint64_t seed = 42;
  ModelConfig model;
  TrainConfig train;
};

inline nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{
      {"archive", c.archive}, {"output_dir", c.output_dir}, {"seed", c.seed},
      {"model", to_json(c.model)}, {"train", to_json(c.train)},
  };
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using config_detail::expect_keys;
  using config_detail::get_or;
  expect_keys(j, {"archive", "output_dir", "seed", "model", "train"}, "");
  RunConfig c;
  c.archive = get_or<std::string>(j, "archive", "");
  c.output_dir = get_or<std::string>(j, "output_dir", "");
  c.seed = get_or(j, "seed", c.seed);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  return c;
}

// Applies one `--set key=value` override onto the raw config document using
// a dotted path; the value parses as JSON when possible, else as a string.
// Unknown keys introduced here are rejected by the strict parse that follows.
inline void apply_override(nlohmann::json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value = nlohmann::json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;  // plain string

  nlohmann::json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("--set: empty path segment in '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace avmc
