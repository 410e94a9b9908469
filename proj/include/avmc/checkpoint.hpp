#pragma once

#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "avmc/config_json.hpp"
#include "avmc/training.hpp"
#include "avmc/zipfile.hpp"

namespace avmc {

// Checkpoint layout (zip container):
//   meta.json           config, seed, epoch counters, metric history,
//                       tensor manifest {name, rows, cols}
//   tensors/<name>.f32  row-major little-endian float32
//
// Parameter blobs round-trip bitwise, so reloading reproduces eval-mode
// predictions exactly.

namespace checkpoint_detail {

inline std::string tensor_bytes(const ParamView<float>& p) {
  std::string bytes(static_cast<std::size_t>(p.size()) * sizeof(float), '\0');
  // Serialize row-major regardless of the in-memory layout.
  float* out = reinterpret_cast<float*>(bytes.data());
  for (Eigen::Index r = 0; r < p.rows; ++r) {
    for (Eigen::Index c = 0; c < p.cols; ++c) {
      *out++ = p.value[c * p.rows + r];
    }
  }
  return bytes;
}

inline void load_tensor(const ParamView<float>& p, const std::string& bytes) {
  const float* in = reinterpret_cast<const float*>(bytes.data());
  for (Eigen::Index r = 0; r < p.rows; ++r) {
    for (Eigen::Index c = 0; c < p.cols; ++c) {
      p.value[c * p.rows + r] = *in++;
    }
  }
}

}  // namespace checkpoint_detail

inline void save_checkpoint(TrainState<float>& state, const ModelConfig& mc, const TrainConfig& tc,
                            const std::string& path) {
  using nlohmann::json;
  auto views = state.model.params();

  json meta;
  meta["format"] = "avmc-checkpoint";
  meta["version"] = 1;
  meta["seed"] = state.seed;
  meta["epoch"] = state.epoch;
  meta["best_epoch"] = state.best_epoch;
  meta["best_valid_mae"] = std::isfinite(state.best_valid_mae)
                               ? json(state.best_valid_mae)
                               : json(nullptr);
  for (Modality m : kFeatureModalities) {
    meta["specs"][to_string(m)] = {{"seq_len", state.model.specs.at(m).seq_len},
                                   {"feat_dim", state.model.specs.at(m).feat_dim}};
  }
  meta["model"] = to_json(mc);
  meta["train"] = to_json(tc);
  meta["history"] = state.history;
  json tensors = json::array();
  for (const auto& p : views) {
    tensors.push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}});
  }
  meta["tensors"] = std::move(tensors);

  ZipWriter zip(path);
  zip.add("meta.json", meta.dump(2));
  for (const auto& p : views) {
    zip.add("tensors/" + p.name + ".f32", checkpoint_detail::tensor_bytes(p));
  }
  zip.finish();
}

struct LoadedCheckpoint {
  TrainState<float> state;
  ModelConfig model_config;
  TrainConfig train_config;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  using nlohmann::json;
  ZipReader zip(path);
  if (!zip.contains("meta.json")) throw FormatError("checkpoint '" + path + "' has no meta.json");
  json meta;
  try {
    meta = json::parse(zip.read("meta.json"));
  } catch (const json::parse_error& e) {
    throw FormatError("checkpoint '" + path + "': meta.json is not valid JSON: " + e.what());
  }
  if (meta.value("format", "") != "avmc-checkpoint") {
    throw FormatError("checkpoint '" + path + "': unrecognized format tag");
  }
  for (const char* key : {"seed", "epoch", "specs", "model", "train", "tensors"}) {
    if (!meta.contains(key)) {
      throw FormatError("checkpoint '" + path + "': meta.json missing '" + std::string(key) + "'");
    }
  }

  LoadedCheckpoint out;
  out.model_config = model_config_from_json(meta.at("model"));
  out.train_config = train_config_from_json(meta.at("train"));

  PerFeature<FeatureSpec> specs;
  for (Modality m : kFeatureModalities) {
    const json& sj = meta.at("specs").at(to_string(m));
    specs.at(m) = FeatureSpec{m, sj.at("seq_len").get<int>(), sj.at("feat_dim").get<int>()};
    specs.at(m).validate();
  }

  const auto seed = meta.at("seed").get<std::uint64_t>();
  RandomSource init_rng = RandomSource(seed).fork(rng_streams::kInit);
  out.state.model = Model<float>::init(specs, out.model_config, init_rng);
  out.state.optimizer = Adam<float>(out.train_config.learning_rate, out.train_config.optimizer);
  out.state.seed = seed;
  out.state.epoch = meta.at("epoch").get<int>();
  out.state.best_epoch = meta.value("best_epoch", 0);
  out.state.best_valid_mae = meta.at("best_valid_mae").is_null()
                                 ? std::numeric_limits<double>::infinity()
                                 : meta.at("best_valid_mae").get<double>();
  if (meta.contains("history")) {
    out.state.history = meta.at("history").get<std::vector<json>>();
  }
  const RandomSource master(seed);
  out.state.data_rng = master.fork(rng_streams::kData);
  out.state.mixup_rng = master.fork(rng_streams::kMixup);
  out.state.dropout_rng = master.fork(rng_streams::kDropout);

  auto views = out.state.model.params();
  if (views.size() != meta.at("tensors").size()) {
    throw ValidationError("checkpoint '" + path + "': expected " + std::to_string(views.size()) +
                          " tensors, meta lists " + std::to_string(meta.at("tensors").size()));
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    const json& tj = meta.at("tensors").at(i);
    const std::string name = tj.at("name").get<std::string>();
    if (name != views[i].name) {
      throw ValidationError("checkpoint '" + path + "': tensor '" + name +
                            "' does not match expected '" + views[i].name + "'");
    }
    if (tj.at("rows").get<Eigen::Index>() != views[i].rows ||
        tj.at("cols").get<Eigen::Index>() != views[i].cols) {
      throw ValidationError("checkpoint '" + path + "': tensor '" + name + "' has shape " +
                            std::to_string(tj.at("rows").get<long>()) + "x" +
                            std::to_string(tj.at("cols").get<long>()) + ", model wants " +
                            std::to_string(views[i].rows) + "x" + std::to_string(views[i].cols));
    }
    const std::string blob_name = "tensors/" + name + ".f32";
    if (!zip.contains(blob_name)) {
      throw ValidationError("checkpoint '" + path + "': missing blob for tensor '" + name + "'");
    }
    const std::string bytes = zip.read(blob_name);
    if (bytes.size() != static_cast<std::size_t>(views[i].size()) * sizeof(float)) {
      throw ValidationError("checkpoint '" + path + "': tensor '" + name + "' blob holds " +
                            std::to_string(bytes.size() / sizeof(float)) + " floats, expected " +
                            std::to_string(views[i].size()));
    }
    checkpoint_detail::load_tensor(views[i], bytes);
  }
  return out;
}

}  // namespace avmc
