#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "avmc/errors.hpp"

namespace avmc {

// ---------------------------------------------------------------------------
// Modalities and splits
// ---------------------------------------------------------------------------

// multimodal is a valid task/label key, never a feature key.
enum class Modality { text, acoustic, visual, multimodal };

enum class Split { train, valid, test, unlabeled };

constexpr std::array<Modality, 3> kFeatureModalities{Modality::text, Modality::acoustic,
                                                     Modality::visual};
// Task order fixed as m, t, a, v everywhere (prediction sets, loss weights).
constexpr std::array<Modality, 4> kTasks{Modality::multimodal, Modality::text, Modality::acoustic,
                                         Modality::visual};

inline bool is_feature_modality(Modality m) { return m != Modality::multimodal; }

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::text: return "text";
    case Modality::acoustic: return "acoustic";
    case Modality::visual: return "visual";
    case Modality::multimodal: return "multimodal";
  }
  return "?";
}

// Single-letter task key as used in label sets and loss weights.
inline const char* task_key(Modality m) {
  switch (m) {
    case Modality::multimodal: return "m";
    case Modality::text: return "t";
    case Modality::acoustic: return "a";
    case Modality::visual: return "v";
  }
  return "?";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "text" || s == "t") return Modality::text;
  if (s == "acoustic" || s == "a") return Modality::acoustic;
  if (s == "visual" || s == "v") return Modality::visual;
  if (s == "multimodal" || s == "m") return Modality::multimodal;
  throw ValidationError("unknown modality '" + s + "'");
}

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    case Split::unlabeled: return "unlabeled";
  }
  return "?";
}

inline Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  if (s == "unlabeled") return Split::unlabeled;
  throw ValidationError("unknown split '" + s + "'");
}

// Small fixed map keyed by feature modality.
template <typename T>
struct PerFeature {
  T text{};
  T acoustic{};
  T visual{};

  T& at(Modality m) {
    switch (m) {
      case Modality::text: return text;
      case Modality::acoustic: return acoustic;
      case Modality::visual: return visual;
      default: throw ValidationError("multimodal is not a feature modality");
    }
  }
  const T& at(Modality m) const { return const_cast<PerFeature*>(this)->at(m); }
};

// Small fixed map keyed by task (m, t, a, v).
template <typename T>
struct PerTask {
  T m{};
  T t{};
  T a{};
  T v{};

  T& at(Modality task) {
    switch (task) {
      case Modality::multimodal: return m;
      case Modality::text: return t;
      case Modality::acoustic: return a;
      case Modality::visual: return v;
    }
    throw ValidationError("bad task key");
  }
  const T& at(Modality task) const { return const_cast<PerTask*>(this)->at(task); }
};

// ---------------------------------------------------------------------------
// Feature sequences
// ---------------------------------------------------------------------------

// Row-major so that a matrix maps 1:1 onto the archive blob layout
// [seq_len x feat_dim] of little-endian float32.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSpec {
  Modality modality = Modality::text;
  int seq_len = 0;
  int feat_dim = 0;

  void validate() const {
    if (!is_feature_modality(modality)) throw ValidationError("FeatureSpec: multimodal feature key");
    if (seq_len < 1) throw ValidationError("FeatureSpec: seq_len must be >= 1");
    if (feat_dim < 1) throw ValidationError("FeatureSpec: feat_dim must be >= 1");
  }

  bool operator==(const FeatureSpec&) const = default;
};

// Published CH-SIMS v2.0 feature geometry.
inline PerFeature<FeatureSpec> chsims_specs() {
  return PerFeature<FeatureSpec>{
      FeatureSpec{Modality::text, 50, 768},
      FeatureSpec{Modality::acoustic, 925, 25},
      FeatureSpec{Modality::visual, 232, 177},
  };
}

// One modality's dense [seq_len x feat_dim] matrix for one instance.
// Invariants checked at construction: shape matches the spec, all entries
// finite, rows at index >= valid_len are exactly zero.
class FeatureSequence {
 public:
  FeatureSequence(FeatureSpec spec, FeatureMatrix values, int valid_len)
      : spec_(spec), values_(std::move(values)), valid_len_(valid_len) {
    spec_.validate();
    if (values_.rows() != spec_.seq_len || values_.cols() != spec_.feat_dim) {
      throw ValidationError(std::string("FeatureSequence: ") + to_string(spec_.modality) +
                            " matrix is " + std::to_string(values_.rows()) + "x" +
                            std::to_string(values_.cols()) + ", spec wants " +
                            std::to_string(spec_.seq_len) + "x" + std::to_string(spec_.feat_dim));
    }
    if (valid_len_ < 0 || valid_len_ > spec_.seq_len) {
      throw ValidationError("FeatureSequence: valid_len out of range");
    }
    if (!values_.allFinite()) {
      throw ValidationError(std::string("FeatureSequence: non-finite value in ") +
                            to_string(spec_.modality) + " features");
    }
    if (valid_len_ < spec_.seq_len) {
      const auto pad = values_.bottomRows(spec_.seq_len - valid_len_);
      if (!(pad.array() == 0.0f).all()) {
        throw ValidationError(std::string("FeatureSequence: nonzero padding rows in ") +
                              to_string(spec_.modality) + " features");
      }
    }
  }

  const FeatureSpec& spec() const { return spec_; }
  const FeatureMatrix& values() const { return values_; }
  int valid_len() const { return valid_len_; }

 private:
  FeatureSpec spec_;
  FeatureMatrix values_;
  int valid_len_;
};

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

// The 11-value annotation grid: multiples of 0.2 in [-1, 1].
inline bool on_label_grid(double v) {
  if (!(v >= -1.0 - 1e-9 && v <= 1.0 + 1e-9)) return false;
  const double scaled = v * 5.0;
  return std::abs(scaled - std::round(scaled)) < 1e-6;
}

// Canonical float for the grid point k/5, k in [-5, 5]. All label values in
// the framework come through here so equal grid points are bit-identical.
inline float grid_label(int fifths) {
  if (fifths < -5 || fifths > 5) throw ValidationError("grid_label: index outside [-5, 5]");
  if (fifths == 0) return 0.0f;
  return static_cast<float>(fifths) / 5.0f;
}

// Clamp to [-1, 1] and round to the nearest multiple of 0.2, ties away
// from zero.
inline float snap_to_label_grid(double v) {
  const double clamped = std::min(1.0, std::max(-1.0, v));
  return grid_label(static_cast<int>(std::round(clamped * 5.0)));  // round: ties away from zero
}

struct LabelSet {
  float m = 0.0f;
  float t = 0.0f;
  float a = 0.0f;
  float v = 0.0f;

  float at(Modality task) const {
    switch (task) {
      case Modality::multimodal: return m;
      case Modality::text: return t;
      case Modality::acoustic: return a;
      case Modality::visual: return v;
    }
    throw ValidationError("bad task key");
  }

  void validate() const {
    for (Modality task : kTasks) {
      if (!on_label_grid(at(task))) {
        throw ValidationError(std::string("LabelSet: ") + task_key(task) +
                              " label off the 0.2 grid: " + std::to_string(at(task)));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

struct Instance {
  std::string id;
  Split split = Split::train;
  FeatureSequence text;
  FeatureSequence acoustic;
  FeatureSequence visual;
  std::optional<LabelSet> labels;

  const FeatureSequence& feature(Modality m) const {
    switch (m) {
      case Modality::text: return text;
      case Modality::acoustic: return acoustic;
      case Modality::visual: return visual;
      default: throw ValidationError("multimodal is not a feature modality");
    }
  }

  void validate() const {
    if (id.empty()) throw ValidationError("Instance: empty id");
    const bool labeled = labels.has_value();
    if (split == Split::unlabeled && labeled) {
      throw ValidationError("Instance " + id + ": unlabeled split carries labels");
    }
    if (split != Split::unlabeled && !labeled) {
      throw ValidationError("Instance " + id + ": " + to_string(split) + " split lacks labels");
    }
    if (labeled) labels->validate();
  }
};

// ---------------------------------------------------------------------------
// Model / mixup / loss configuration
// ---------------------------------------------------------------------------

enum class Activation { relu, tanh, leaky_relu, identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

struct ModelConfig {
  // Encoder output widths h_k. Text carries the richest pretrained features.
  PerFeature<int> hidden{128, 32, 64};
  int lstm_layers = 1;
  // Per-direction recurrent width; 0 derives hidden/2 per modality so the
  // concatenated bidirectional summary already matches the encoder width.
  int lstm_hidden = 0;
  // Widths of the first two classifier layers; 0 derives input/2 and input/4
  // per head. The third layer always has width 1.
  std::array<int, 2> classifier_hidden{0, 0};
  Activation activation = Activation::relu;
  // Applied between classifier layers only, training mode only.
  float dropout = 0.0f;

  int fused_dim() const { return hidden.text + hidden.acoustic + hidden.visual; }

  int lstm_hidden_for(Modality m) const {
    return lstm_hidden > 0 ? lstm_hidden : std::max(1, hidden.at(m) / 2);
  }

  std::array<int, 2> classifier_dims(int input_dim) const {
    const int c1 = classifier_hidden[0] > 0 ? classifier_hidden[0] : std::max(1, input_dim / 2);
    const int c2 = classifier_hidden[1] > 0 ? classifier_hidden[1] : std::max(1, input_dim / 4);
    return {c1, c2};
  }

  void validate() const {
    for (Modality m : kFeatureModalities) {
      if (hidden.at(m) < 1) throw ConfigError("ModelConfig: hidden dims must be positive");
    }
    if (lstm_layers < 1) throw ConfigError("ModelConfig: lstm_layers must be >= 1");
    if (lstm_hidden < 0) throw ConfigError("ModelConfig: lstm_hidden must be >= 0");
    if (classifier_hidden[0] < 0 || classifier_hidden[1] < 0) {
      throw ConfigError("ModelConfig: classifier_hidden must be >= 0");
    }
    if (!(dropout >= 0.0f && dropout < 1.0f)) throw ConfigError("ModelConfig: dropout must be in [0, 1)");
  }
};

struct LossWeights {
  PerTask<double> alpha{1.0, 1.0, 1.0, 1.0};
  struct {
    double a = 1.0;
    double v = 1.0;
  } beta;

  void validate() const {
    double alpha_sum = 0.0;
    for (Modality task : kTasks) {
      const double w = alpha.at(task);
      if (w < 0.0) throw ConfigError("LossWeights: alpha must be nonnegative");
      alpha_sum += w;
    }
    if (alpha_sum <= 0.0) throw ConfigError("LossWeights: at least one alpha must be positive");
    if (beta.a < 0.0 || beta.v < 0.0) throw ConfigError("LossWeights: beta must be nonnegative");
  }
};

struct MixupConfig {
  // Shared shape parameter of the symmetric Beta distribution.
  double beta_alpha = 0.5;
  // One lambda per batch, shared by the acoustic and visual streams.
  enum class Granularity { per_batch };
  Granularity granularity = Granularity::per_batch;
  // Interpolated targets are constants: no gradient flows through them.
  bool target_stop_gradient = true;

  void validate() const {
    if (!(beta_alpha > 0.0)) throw ConfigError("MixupConfig: beta_alpha must be positive");
  }
};

}  // namespace avmc
