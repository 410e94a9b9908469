#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "avmc/model.hpp"

namespace avmc {

// Six-metric evaluation record for one prediction/label collection.
// acc2/f1/acc2_weak/corr/r_square are percentages; mae is in label units.
// acc2_weak is absent when no label falls in [-0.4, 0.4]; corr and r_square
// are absent when the evaluated labels (or predictions, for corr) have zero
// variance.
struct MetricsReport {
  Modality task = Modality::multimodal;
  std::string label_source = "multimodal";  // "multimodal" or "unimodal"
  int n_instances = 0;
  int n_weak = 0;
  double acc2 = 0.0;
  double f1 = 0.0;
  std::optional<double> acc2_weak;
  double mae = 0.0;
  std::optional<double> corr;
  std::optional<double> r_square;
};

namespace metrics_detail {

// Binary polarity: negative vs non-negative (exact zero counts as
// non-negative).
inline bool negative(double v) { return v < 0.0; }

inline double binary_accuracy(const std::vector<double>& pred, const std::vector<double>& label) {
  int agree = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (negative(pred[i]) == negative(label[i])) ++agree;
  }
  return 100.0 * agree / static_cast<double>(pred.size());
}

// Support-weighted mean of the two per-class F1 scores.
inline double weighted_f1(const std::vector<double>& pred, const std::vector<double>& label) {
  double total = 0.0;
  for (bool positive_class : {false, true}) {
    int tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool y = negative(label[i]) == positive_class;
      const bool p = negative(pred[i]) == positive_class;
      support += y ? 1 : 0;
      tp += (y && p) ? 1 : 0;
      fp += (!y && p) ? 1 : 0;
      fn += (y && !p) ? 1 : 0;
    }
    const double prec = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f1 = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    total += f1 * support;
  }
  return 100.0 * total / static_cast<double>(pred.size());
}

}  // namespace metrics_detail

inline MetricsReport compute_metrics(const std::vector<double>& predictions,
                                     const std::vector<double>& labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw ValidationError("compute_metrics: inputs must be nonempty and of equal length");
  }
  const auto n = predictions.size();
  MetricsReport r;
  r.n_instances = static_cast<int>(n);

  r.acc2 = metrics_detail::binary_accuracy(predictions, labels);
  r.f1 = metrics_detail::weighted_f1(predictions, labels);

  // Weak-emotion subset: ground-truth label in [-0.4, 0.4]. The bounds are
  // widened by a float ulp so grid labels stored as float32 (0.4f is
  // 0.400000006 as a double) stay inside the closed interval.
  constexpr double kWeakBound = 0.4 + 1e-7;
  std::vector<double> weak_pred, weak_label;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= -kWeakBound && labels[i] <= kWeakBound) {
      weak_pred.push_back(predictions[i]);
      weak_label.push_back(labels[i]);
    }
  }
  r.n_weak = static_cast<int>(weak_pred.size());
  if (r.n_weak > 0) r.acc2_weak = metrics_detail::binary_accuracy(weak_pred, weak_label);

  double abs_err = 0.0, pred_mean = 0.0, label_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    abs_err += std::abs(predictions[i] - labels[i]);
    pred_mean += predictions[i];
    label_mean += labels[i];
  }
  r.mae = abs_err / static_cast<double>(n);
  pred_mean /= static_cast<double>(n);
  label_mean /= static_cast<double>(n);

  double cov = 0.0, pred_ss = 0.0, label_ss = 0.0, res_ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dp = predictions[i] - pred_mean;
    const double dl = labels[i] - label_mean;
    cov += dp * dl;
    pred_ss += dp * dp;
    label_ss += dl * dl;
    const double e = labels[i] - predictions[i];
    res_ss += e * e;
  }
  constexpr double kVarFloor = 1e-18;
  if (pred_ss > kVarFloor && label_ss > kVarFloor) {
    r.corr = 100.0 * cov / std::sqrt(pred_ss * label_ss);
  }
  if (label_ss > kVarFloor) {
    r.r_square = 100.0 * (1.0 - res_ss / label_ss);
  }
  return r;
}

// Percent metrics round to 2 decimals in emitted reports only.
inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  auto pct = [](double v) { return std::round(v * 100.0) / 100.0; };
  nlohmann::json j;
  j["task"] = task_key(r.task);
  j["label_source"] = r.label_source;
  j["n_instances"] = r.n_instances;
  j["n_weak"] = r.n_weak;
  j["acc2"] = pct(r.acc2);
  j["f1"] = pct(r.f1);
  j["acc2_weak"] = r.acc2_weak ? nlohmann::json(pct(*r.acc2_weak)) : nlohmann::json(nullptr);
  j["mae"] = r.mae;
  j["corr"] = r.corr ? nlohmann::json(pct(*r.corr)) : nlohmann::json(nullptr);
  j["r_square"] = r.r_square ? nlohmann::json(pct(*r.r_square)) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Split evaluation
// ---------------------------------------------------------------------------

// Per-instance predictions with the labels they are evaluated against.
struct PredictionRecord {
  std::string id;
  double prediction = 0.0;
  double label = 0.0;
};

template <typename S>
std::vector<PredictionRecord> collect_predictions(Model<S>& model, const Dataset& dataset,
                                                  Split split, Modality task,
                                                  const std::string& label_source,
                                                  int batch_size = 64) {
  if (label_source != "multimodal" && label_source != "unimodal") {
    throw ValidationError("label_source must be 'multimodal' or 'unimodal'");
  }
  if (label_source == "unimodal" && task == Modality::multimodal) {
    throw ValidationError("unimodal labels are undefined for the multimodal task");
  }
  const Modality label_key = label_source == "multimodal" ? Modality::multimodal : task;
  std::vector<PredictionRecord> out;
  for (const Batch& batch : make_batches(dataset, {split}, batch_size, false, nullptr)) {
    const std::vector<PredictionSet> preds = model.predict(batch);
    for (int i = 0; i < batch.size(); ++i) {
      if (!batch.instances[static_cast<std::size_t>(i)]->labels) {
        throw ValidationError("instance '" + batch.id(i) + "' in split '" +
                              std::string(to_string(split)) + "' has no labels");
      }
      out.push_back(PredictionRecord{
          batch.id(i), preds[static_cast<std::size_t>(i)].at(task),
          static_cast<double>(batch.instances[static_cast<std::size_t>(i)]->labels->at(label_key))});
    }
  }
  return out;
}

// Eval-mode forward over one split, one report per requested task.
template <typename S>
std::vector<MetricsReport> evaluate(Model<S>& model, const Dataset& dataset, Split split,
                                    const std::vector<Modality>& tasks,
                                    const std::string& label_source, int batch_size = 64) {
  std::vector<MetricsReport> reports;
  for (Modality task : tasks) {
    const auto records = collect_predictions(model, dataset, split, task, label_source, batch_size);
    if (records.empty()) {
      throw ValidationError(std::string("split '") + to_string(split) + "' is empty");
    }
    std::vector<double> preds, labels;
    preds.reserve(records.size());
    labels.reserve(records.size());
    for (const auto& rec : records) {
      preds.push_back(rec.prediction);
      labels.push_back(rec.label);
    }
    MetricsReport r = compute_metrics(preds, labels);
    r.task = task;
    r.label_source = label_source;
    reports.push_back(r);
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Prediction files: CSV id,prediction,label
// ---------------------------------------------------------------------------

inline std::string predictions_to_csv(const std::vector<PredictionRecord>& records) {
  std::ostringstream out;
  out << "id,prediction,label\n";
  out.precision(9);
  for (const auto& rec : records) {
    out << rec.id << "," << rec.prediction << "," << rec.label << "\n";
  }
  return out.str();
}

inline std::vector<PredictionRecord> predictions_from_csv(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  int line_no = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("id,", 0) == 0) continue;  // header
    std::istringstream ls(line);
    std::string id, pred, label;
    if (!std::getline(ls, id, ',') || !std::getline(ls, pred, ',') || !std::getline(ls, label)) {
      throw FormatError("prediction CSV: malformed row " + std::to_string(line_no));
    }
    PredictionRecord rec;
    rec.id = id;
    try {
      rec.prediction = std::stod(pred);
      rec.label = std::stod(label);
    } catch (const std::exception&) {
      throw FormatError("prediction CSV: non-numeric value at row " + std::to_string(line_no));
    }
    if (!std::isfinite(rec.prediction) || !std::isfinite(rec.label)) {
      throw ValidationError("prediction CSV: non-finite value at row " + std::to_string(line_no));
    }
    if (!seen.insert(rec.id).second) {
      throw ValidationError("prediction CSV: duplicate id '" + rec.id + "'");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace avmc
