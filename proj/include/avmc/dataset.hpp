#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "avmc/rng.hpp"
#include "avmc/types.hpp"

namespace avmc {

struct DatasetStats {
  int n_train = 0;
  int n_valid = 0;
  int n_test = 0;
  int n_unlabeled = 0;

  int n_supervised() const { return n_train + n_valid + n_test; }
  int n_unsupervised() const { return n_unlabeled; }
};

// Owns the instances; read-only after construction, safe to share across
// threads. Construction validates every instance against the specs.
class Dataset {
 public:
  Dataset(PerFeature<FeatureSpec> specs, std::vector<Instance> instances)
      : specs_(specs), instances_(std::move(instances)) {
    for (Modality m : kFeatureModalities) specs_.at(m).validate();
    std::unordered_set<std::string> seen;
    for (const Instance& inst : instances_) {
      inst.validate();
      if (!seen.insert(inst.id).second) {
        throw ValidationError("Dataset: duplicate instance id '" + inst.id + "'");
      }
      for (Modality m : kFeatureModalities) {
        if (inst.feature(m).spec() != specs_.at(m)) {
          throw ValidationError("Dataset: instance '" + inst.id + "' " + to_string(m) +
                                " features do not match the dataset spec");
        }
      }
      switch (inst.split) {
        case Split::train: ++stats_.n_train; break;
        case Split::valid: ++stats_.n_valid; break;
        case Split::test: ++stats_.n_test; break;
        case Split::unlabeled: ++stats_.n_unlabeled; break;
      }
    }
  }

  const PerFeature<FeatureSpec>& specs() const { return specs_; }
  const std::vector<Instance>& instances() const { return instances_; }
  const DatasetStats& stats() const { return stats_; }

  std::vector<const Instance*> select(const std::vector<Split>& splits) const {
    std::vector<const Instance*> out;
    for (const Instance& inst : instances_) {
      if (std::find(splits.begin(), splits.end(), inst.split) != splits.end()) {
        out.push_back(&inst);
      }
    }
    return out;
  }

 private:
  PerFeature<FeatureSpec> specs_;
  std::vector<Instance> instances_;
  DatasetStats stats_;
};

// ---------------------------------------------------------------------------
// Padding / truncation
// ---------------------------------------------------------------------------

// Pads with zero rows or keeps the sequence prefix so the output has exactly
// spec.seq_len rows.
inline FeatureSequence pad_or_truncate(const FeatureMatrix& raw, const FeatureSpec& spec) {
  spec.validate();
  if (raw.cols() != spec.feat_dim) {
    throw ValidationError(std::string("pad_or_truncate: ") + to_string(spec.modality) +
                          " feature dim is " + std::to_string(raw.cols()) + ", spec wants " +
                          std::to_string(spec.feat_dim));
  }
  if (raw.rows() < 1) throw ValidationError("pad_or_truncate: input must have at least one row");
  FeatureMatrix out = FeatureMatrix::Zero(spec.seq_len, spec.feat_dim);
  const int kept = std::min<int>(static_cast<int>(raw.rows()), spec.seq_len);
  out.topRows(kept) = raw.topRows(kept);
  return FeatureSequence(spec, std::move(out), kept);
}

// ---------------------------------------------------------------------------
// Annotation aggregation
// ---------------------------------------------------------------------------

struct AnnotationRecord {
  std::array<int, 7> scores{};
};

// Drop one maximal and one minimal score, average the remaining five, map
// into [-1, 1] by dividing by 3, then round to the nearest multiple of 0.2
// with ties away from zero. Integer arithmetic throughout: the result in
// fifths is round(sum5 / 3) where sum5 is the trimmed sum.
inline float aggregate_annotations(const AnnotationRecord& record) {
  int sum = 0, lo = record.scores[0], hi = record.scores[0];
  for (int s : record.scores) {
    if (s < -3 || s > 3) {
      throw ValidationError("aggregate_annotations: score " + std::to_string(s) +
                            " outside [-3, 3]");
    }
    sum += s;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  const int sum5 = sum - lo - hi;
  const int mag = std::abs(sum5);
  const int fifths = (2 * mag + 3) / 6;  // round-half-away-from-zero of mag/3
  const float value = static_cast<float>((sum5 < 0 ? -fifths : fifths)) / 5.0f;
  return value == 0.0f ? 0.0f : value;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

// Desk-scale surrogate: each instance carries a latent sentiment s drawn
// uniformly from the 11-value grid. Every modality embeds s along a fixed
// random unit probe with modality-specific gain and noise (visual carries
// the strongest signal, acoustic the weakest); unimodal labels are noisy
// quantizations of s, the multimodal label is s itself.
inline PerFeature<FeatureSpec> default_synthetic_specs() {
  return PerFeature<FeatureSpec>{
      FeatureSpec{Modality::text, 12, 32},
      FeatureSpec{Modality::acoustic, 40, 16},
      FeatureSpec{Modality::visual, 30, 20},
  };
}

inline Dataset generate_synthetic(int n_labeled, int n_unlabeled,
                                  const PerFeature<FeatureSpec>& specs, std::uint64_t seed) {
  if (n_labeled < 0 || n_unlabeled < 0) {
    throw ValidationError("generate_synthetic: counts must be nonnegative");
  }
  struct ModalityGen {
    float gain;
    float row_noise;
    float label_noise;
  };
  PerFeature<ModalityGen> gen{
      ModalityGen{0.9f, 0.45f, 0.15f},   // text
      ModalityGen{0.40f, 0.90f, 0.35f},  // acoustic
      ModalityGen{1.1f, 0.35f, 0.10f},   // visual
  };

  RandomSource rng(seed);
  PerFeature<Eigen::VectorXf> probe;
  for (Modality m : kFeatureModalities) {
    Eigen::VectorXf p(specs.at(m).feat_dim);
    for (int i = 0; i < p.size(); ++i) p[i] = static_cast<float>(rng.normal());
    probe.at(m) = p.normalized();
  }

  // Split boundaries mirror the 9:2:3 train/valid/test partition.
  const int n_train = n_labeled * 9 / 14;
  const int n_valid = n_labeled * 2 / 14;

  const int total = n_labeled + n_unlabeled;
  std::vector<Instance> instances;
  instances.reserve(total);
  for (int i = 0; i < total; ++i) {
    const bool labeled = i < n_labeled;
    const float s = grid_label(static_cast<int>(rng.uniform_int(11)) - 5);

    std::vector<FeatureSequence> feats;
    feats.reserve(3);
    for (Modality m : kFeatureModalities) {
      const FeatureSpec& spec = specs.at(m);
      const ModalityGen& g = gen.at(m);
      const int min_len = std::max(1, spec.seq_len / 2);
      const int valid_len =
          min_len + static_cast<int>(rng.uniform_int(spec.seq_len - min_len + 1));
      FeatureMatrix values = FeatureMatrix::Zero(spec.seq_len, spec.feat_dim);
      for (int r = 0; r < valid_len; ++r) {
        for (int c = 0; c < spec.feat_dim; ++c) {
          values(r, c) = s * g.gain * probe.at(m)[c] +
                         g.row_noise * static_cast<float>(rng.normal());
        }
      }
      feats.emplace_back(spec, std::move(values), valid_len);
    }

    std::optional<LabelSet> labels;
    Split split = Split::unlabeled;
    if (labeled) {
      LabelSet ls;
      ls.m = s;
      ls.t = snap_to_label_grid(s + gen.text.label_noise * rng.normal());
      ls.a = snap_to_label_grid(s + gen.acoustic.label_noise * rng.normal());
      ls.v = snap_to_label_grid(s + gen.visual.label_noise * rng.normal());
      labels = ls;
      split = i < n_train ? Split::train : (i < n_train + n_valid ? Split::valid : Split::test);
    }

    char id[16];
    std::snprintf(id, sizeof(id), "syn-%06d", i);
    instances.push_back(Instance{id, split, std::move(feats[0]), std::move(feats[1]),
                                 std::move(feats[2]), labels});
  }
  return Dataset(specs, std::move(instances));
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

// References instances owned by a Dataset; the dataset must outlive the
// batch. Label entries where mask == 0 are ignored by every loss.
struct Batch {
  std::vector<const Instance*> instances;
  PerTask<std::vector<float>> labels;
  std::vector<std::uint8_t> mask;  // 1 = labeled

  int size() const { return static_cast<int>(instances.size()); }
  const std::string& id(int i) const { return instances[i]->id; }
  const FeatureMatrix& feature(Modality m, int i) const {
    return instances[i]->feature(m).values();
  }
};

inline Batch make_batch(const std::vector<const Instance*>& insts) {
  Batch b;
  b.instances = insts;
  b.mask.resize(insts.size());
  for (Modality task : kTasks) b.labels.at(task).resize(insts.size(), 0.0f);
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const Instance& inst = *insts[i];
    b.mask[i] = inst.labels.has_value() ? 1 : 0;
    if (inst.labels) {
      for (Modality task : kTasks) b.labels.at(task)[i] = inst.labels->at(task);
    }
  }
  return b;
}

// One pass over the selected instances: every instance appears exactly once,
// the last batch may be short. With shuffle, the order is a pure function of
// the RandomSource state.
inline std::vector<Batch> make_batches(const Dataset& dataset, const std::vector<Split>& splits,
                                       int batch_size, bool shuffle, RandomSource* rng) {
  if (batch_size < 1) throw ValidationError("make_batches: batch_size must be >= 1");
  std::vector<const Instance*> selected = dataset.select(splits);
  if (shuffle) {
    if (rng == nullptr) throw ValidationError("make_batches: shuffle requires a RandomSource");
    for (std::size_t i = selected.size(); i > 1; --i) {  // Fisher-Yates
      const std::size_t j = static_cast<std::size_t>(rng->uniform_int(static_cast<std::int64_t>(i)));
      std::swap(selected[i - 1], selected[j]);
    }
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < selected.size(); start += batch_size) {
    const std::size_t end = std::min(selected.size(), start + batch_size);
    batches.push_back(make_batch({selected.begin() + start, selected.begin() + end}));
  }
  return batches;
}

}  // namespace avmc
