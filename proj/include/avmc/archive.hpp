#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "avmc/dataset.hpp"
#include "avmc/zipfile.hpp"

namespace avmc {

// Feature archive layout (zip container):
//   manifest.json            version, per-modality specs, instance records
//   data/<id>/<modality>.f32 row-major [seq_len x feat_dim] little-endian f32
//
// Blobs round-trip bit-identically; labels are stored as exact grid values.

namespace archive_detail {

using nlohmann::json;

inline double grid_value(float v) {
  // Grid labels serialize as the shortest double for k/5, e.g. "0.2".
  return std::round(static_cast<double>(v) * 5.0) / 5.0;
}

inline json spec_to_json(const FeatureSpec& s) {
  return json{{"seq_len", s.seq_len}, {"feat_dim", s.feat_dim}};
}

inline FeatureSpec spec_from_json(Modality m, const json& j) {
  if (!j.is_object() || !j.contains("seq_len") || !j.contains("feat_dim")) {
    throw FormatError(std::string("manifest: bad spec for ") + to_string(m));
  }
  FeatureSpec s{m, j.at("seq_len").get<int>(), j.at("feat_dim").get<int>()};
  s.validate();
  return s;
}

}  // namespace archive_detail

inline void write_archive(const Dataset& dataset, const std::string& path) {
  using nlohmann::json;
  json manifest;
  manifest["version"] = 1;
  for (Modality m : kFeatureModalities) {
    manifest["specs"][to_string(m)] = archive_detail::spec_to_json(dataset.specs().at(m));
  }
  json records = json::array();
  for (const Instance& inst : dataset.instances()) {
    json rec;
    rec["id"] = inst.id;
    rec["split"] = to_string(inst.split);
    if (inst.labels) {
      rec["labels"] = json{{"m", archive_detail::grid_value(inst.labels->m)},
                           {"t", archive_detail::grid_value(inst.labels->t)},
                           {"a", archive_detail::grid_value(inst.labels->a)},
                           {"v", archive_detail::grid_value(inst.labels->v)}};
    } else {
      rec["labels"] = nullptr;
    }
    for (Modality m : kFeatureModalities) {
      rec["valid_len"][to_string(m)] = inst.feature(m).valid_len();
    }
    records.push_back(std::move(rec));
  }
  manifest["instances"] = std::move(records);

  ZipWriter zip(path);
  zip.add("manifest.json", manifest.dump(2));
  for (const Instance& inst : dataset.instances()) {
    for (Modality m : kFeatureModalities) {
      const FeatureMatrix& values = inst.feature(m).values();
      zip.add("data/" + inst.id + "/" + to_string(m) + ".f32", values.data(),
              static_cast<std::size_t>(values.size()) * sizeof(float));
    }
  }
  zip.finish();
}

inline Dataset load_archive(const std::string& path) {
  using nlohmann::json;
  ZipReader zip(path);
  if (!zip.contains("manifest.json")) {
    throw FormatError("archive '" + path + "' has no manifest.json");
  }
  json manifest;
  try {
    manifest = json::parse(zip.read("manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError("archive '" + path + "': manifest.json is not valid JSON: " + e.what());
  }
  if (!manifest.contains("version") || !manifest.contains("specs") ||
      !manifest.contains("instances")) {
    throw FormatError("archive '" + path + "': manifest missing version/specs/instances");
  }

  PerFeature<FeatureSpec> specs;
  for (Modality m : kFeatureModalities) {
    if (!manifest["specs"].contains(to_string(m))) {
      throw FormatError(std::string("manifest: missing spec for ") + to_string(m));
    }
    specs.at(m) = archive_detail::spec_from_json(m, manifest["specs"][to_string(m)]);
  }

  std::vector<Instance> instances;
  for (const json& rec : manifest["instances"]) {
    if (!rec.contains("id") || !rec.contains("split") || !rec.contains("labels") ||
        !rec.contains("valid_len")) {
      throw FormatError("manifest: instance record missing id/split/labels/valid_len");
    }
    const std::string id = rec.at("id").get<std::string>();
    const Split split = split_from_string(rec.at("split").get<std::string>());

    std::optional<LabelSet> labels;
    if (!rec.at("labels").is_null()) {
      const json& lj = rec.at("labels");
      for (Modality task : kTasks) {
        if (!lj.contains(task_key(task))) {
          throw ValidationError("instance '" + id + "': labels missing key '" +
                                task_key(task) + "'");
        }
      }
      labels = LabelSet{lj.at("m").get<float>(), lj.at("t").get<float>(), lj.at("a").get<float>(),
                        lj.at("v").get<float>()};
    }

    std::vector<FeatureSequence> feats;
    feats.reserve(3);
    for (Modality m : kFeatureModalities) {
      const FeatureSpec& spec = specs.at(m);
      if (!rec.at("valid_len").contains(to_string(m))) {
        throw ValidationError("instance '" + id + "': valid_len missing " +
                              std::string(to_string(m)));
      }
      const int valid_len = rec.at("valid_len").at(to_string(m)).get<int>();
      const std::string blob_name = "data/" + id + "/" + to_string(m) + ".f32";
      if (!zip.contains(blob_name)) {
        throw ValidationError("instance '" + id + "': missing blob " + blob_name);
      }
      const std::string blob = zip.read(blob_name);
      const std::size_t expected =
          static_cast<std::size_t>(spec.seq_len) * spec.feat_dim * sizeof(float);
      if (blob.size() != expected) {
        throw ValidationError("instance '" + id + "': " + to_string(m) + " blob holds " +
                              std::to_string(blob.size() / sizeof(float)) + " floats, spec " +
                              std::to_string(spec.seq_len) + "x" + std::to_string(spec.feat_dim) +
                              " wants " + std::to_string(expected / sizeof(float)));
      }
      FeatureMatrix values(spec.seq_len, spec.feat_dim);
      std::memcpy(values.data(), blob.data(), blob.size());
      try {
        feats.emplace_back(spec, std::move(values), valid_len);
      } catch (const ValidationError& e) {
        throw ValidationError("instance '" + id + "': " + e.what());
      }
    }
    instances.push_back(Instance{id, split, std::move(feats[0]), std::move(feats[1]),
                                 std::move(feats[2]), labels});
  }
  return Dataset(specs, std::move(instances));
}

}  // namespace avmc
