#pragma once

#include <limits>
#include <optional>

#include <json.hpp>

#include "avmc/losses.hpp"
#include "avmc/metrics.hpp"
#include "avmc/mixup.hpp"
#include "avmc/model.hpp"
#include "avmc/optimizer.hpp"

namespace avmc {

enum class TrainMode { supervised, semi };

inline const char* to_string(TrainMode m) {
  return m == TrainMode::supervised ? "supervised" : "semi";
}

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "supervised") return TrainMode::supervised;
  if (s == "semi") return TrainMode::semi;
  throw ConfigError("unknown train mode '" + s + "'");
}

struct AblationFlags {
  bool disable_mixup_a = false;
  bool disable_mixup_v = false;
  bool disable_unimodal_tasks = false;
};

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 1e-3;
  int max_epochs = 50;
  int early_stop_patience = 8;
  double grad_clip_norm = 5.0;
  AdamConfig optimizer;
  LossWeights loss_weights;
  MixupConfig mixup;
  TrainMode mode = TrainMode::supervised;
  AblationFlags ablation;

  // Loss weights with the ablation flags applied.
  LossWeights effective_weights() const {
    LossWeights w = loss_weights;
    if (ablation.disable_mixup_a) w.beta.a = 0.0;
    if (ablation.disable_mixup_v) w.beta.v = 0.0;
    if (ablation.disable_unimodal_tasks) w.alpha.t = w.alpha.a = w.alpha.v = 0.0;
    return w;
  }

  bool mixup_enabled() const {
    const LossWeights w = effective_weights();
    return w.beta.a > 0.0 || w.beta.v > 0.0;
  }

  void validate() const {
    if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (mixup_enabled() && batch_size < 2) {
      throw ConfigError("TrainConfig: batch_size must be >= 2 when mixup is enabled");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be positive");
    if (max_epochs < 1) throw ConfigError("TrainConfig: max_epochs must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("TrainConfig: early_stop_patience must be >= 1");
    if (grad_clip_norm < 0.0) throw ConfigError("TrainConfig: grad_clip_norm must be >= 0");
    optimizer.validate();
    effective_weights().validate();
    mixup.validate();
  }
};

// ---------------------------------------------------------------------------
// Single optimization steps
// ---------------------------------------------------------------------------

struct StepLosses {
  PerTask<double> reg{};  // unweighted per-task regression losses
  double reg_total = 0.0; // alpha-weighted
  double mix_a = 0.0;
  double mix_v = 0.0;
  double mix_total = 0.0; // beta-weighted
  double total = 0.0;
};

// Consistency targets pinned to constants computed at some base parameter
// point. Used by the finite-difference harness, where the loss must be
// evaluated as a function of the parameters with the stop-gradient targets
// held fixed.
template <typename S>
struct FrozenTargets {
  std::optional<Vec<S>> a, v;
};

// One mixed-data step: masked regression on all four tasks plus mixup
// consistency on the enabled acoustic/visual streams. Gradients (when
// requested) replace the model's accumulated gradients.
template <typename S>
StepLosses phase1_step(Model<S>& model, const Batch& batch, const TrainConfig& tc,
                       const MixupDraw* draw, RandomSource* dropout_rng, bool with_grad,
                       const FrozenTargets<S>* frozen = nullptr) {
  const LossWeights w = tc.effective_weights();
  if (with_grad) model.zero_grad();
  auto fr = model.forward(batch, /*training=*/true, dropout_rng);

  StepLosses out;
  std::array<Vec<S>, 4> dy;
  for (Modality task : kTasks) {
    const int k = task_index(task);
    Vec<S> g;
    out.reg.at(task) = static_cast<double>(regression_loss(
        fr.yhat[static_cast<std::size_t>(k)], batch.labels.at(task), batch.mask,
        with_grad ? &g : nullptr));
    if (with_grad) dy[static_cast<std::size_t>(k)] = g * S(w.alpha.at(task));
  }
  out.reg_total = total_regression_loss(out.reg, w);

  Mat<S> dFa_extra, dFv_extra;
  bool has_a = false, has_v = false;
  for (Modality task : {Modality::acoustic, Modality::visual}) {
    const double beta = task == Modality::acoustic ? w.beta.a : w.beta.v;
    if (beta <= 0.0) continue;  // disabled stream: no mixed pass at all
    if (draw == nullptr) throw ConfigError("phase1_step: mixup enabled but no draw provided");
    const Mat<S>& reps = task == Modality::acoustic ? fr.F_a : fr.F_v;
    const Vec<S>& preds = fr.yhat[static_cast<std::size_t>(task_index(task))];
    MixedBatch<S> mixed = mixup_batch(reps, preds, *draw);
    const std::optional<Vec<S>>& pinned = task == Modality::acoustic
                                              ? (frozen ? frozen->a : std::nullopt)
                                              : (frozen ? frozen->v : std::nullopt);
    const Vec<S>& target = pinned ? *pinned : mixed.targets;

    typename Head<S>::Cache mix_cache;
    const Vec<S> mixed_pred =
        model.head(task).forward(mixed.reps, /*training=*/true, dropout_rng, &mix_cache);
    Vec<S> dcons;
    const double loss =
        static_cast<double>(consistency_loss(mixed_pred, target, with_grad ? &dcons : nullptr));
    if (task == Modality::acoustic) {
      out.mix_a = loss;
    } else {
      out.mix_v = loss;
    }
    if (with_grad) {
      const Vec<S> dmixed_pred = dcons * S(beta);
      const Mat<S> dmixed_rep = model.head(task).backward(mix_cache, dmixed_pred);
      Mat<S>& extra = task == Modality::acoustic ? dFa_extra : dFv_extra;
      extra = mixup_backward(dmixed_rep, *draw);
      (task == Modality::acoustic ? has_a : has_v) = true;
      if (!tc.mixup.target_stop_gradient && !pinned) {
        // Gradient through the interpolated target.
        const Vec<S> dtarget = -(dcons * S(beta));
        dy[static_cast<std::size_t>(task_index(task))] += mixup_backward_targets(dtarget, *draw);
      }
    }
  }
  out.mix_total = total_consistency_loss(out.mix_a, out.mix_v, w);
  out.total = out.reg_total + out.mix_total;
  if (with_grad) {
    model.backward(fr, dy, has_a ? &dFa_extra : nullptr, has_v ? &dFv_extra : nullptr);
  }
  return out;
}

// Supervised-only pass: masked regression losses, no mixup.
template <typename S>
StepLosses phase2_step(Model<S>& model, const Batch& batch, const TrainConfig& tc,
                       RandomSource* dropout_rng, bool with_grad) {
  const LossWeights w = tc.effective_weights();
  if (with_grad) model.zero_grad();
  auto fr = model.forward(batch, /*training=*/true, dropout_rng);
  StepLosses out;
  std::array<Vec<S>, 4> dy;
  for (Modality task : kTasks) {
    const int k = task_index(task);
    Vec<S> g;
    out.reg.at(task) = static_cast<double>(regression_loss(
        fr.yhat[static_cast<std::size_t>(k)], batch.labels.at(task), batch.mask,
        with_grad ? &g : nullptr));
    if (with_grad) dy[static_cast<std::size_t>(k)] = g * S(w.alpha.at(task));
  }
  out.reg_total = total_regression_loss(out.reg, w);
  out.total = out.reg_total;
  if (with_grad) model.backward(fr, dy);
  return out;
}

// ---------------------------------------------------------------------------
// Epochs
// ---------------------------------------------------------------------------

struct EpochLosses {
  PerTask<double> phase1_reg{};
  double phase1_reg_total = 0.0;
  double phase1_mix_a = 0.0;
  double phase1_mix_v = 0.0;
  double phase1_mix_total = 0.0;
  double phase1_total = 0.0;
  int phase1_steps = 0;
  PerTask<double> phase2_reg{};
  double phase2_reg_total = 0.0;
  int phase2_steps = 0;
};

template <typename S = float>
struct TrainState {
  Model<S> model;
  Adam<S> optimizer;
  std::uint64_t seed = 0;
  int epoch = 0;  // completed epochs
  long optimizer_steps = 0;
  double best_valid_mae = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<nlohmann::json> history;
  RandomSource data_rng{0}, mixup_rng{0}, dropout_rng{0};
};

// Stream ids for the per-purpose child RNGs derived from the run seed.
namespace rng_streams {
constexpr std::uint64_t kInit = 0;
constexpr std::uint64_t kData = 1;
constexpr std::uint64_t kMixup = 2;
constexpr std::uint64_t kDropout = 3;
}  // namespace rng_streams

template <typename S = float>
TrainState<S> init_train_state(const PerFeature<FeatureSpec>& specs, const ModelConfig& mc,
                               const TrainConfig& tc, std::uint64_t seed) {
  tc.validate();
  const RandomSource master(seed);
  RandomSource init_rng = master.fork(rng_streams::kInit);
  TrainState<S> state;
  state.model = Model<S>::init(specs, mc, init_rng);
  state.optimizer = Adam<S>(tc.learning_rate, tc.optimizer);
  state.seed = seed;
  state.data_rng = master.fork(rng_streams::kData);
  state.mixup_rng = master.fork(rng_streams::kMixup);
  state.dropout_rng = master.fork(rng_streams::kDropout);
  return state;
}

namespace train_detail {

template <typename S>
void accumulate_phase1(EpochLosses& acc, const StepLosses& step) {
  for (Modality task : kTasks) acc.phase1_reg.at(task) += step.reg.at(task);
  acc.phase1_reg_total += step.reg_total;
  acc.phase1_mix_a += step.mix_a;
  acc.phase1_mix_v += step.mix_v;
  acc.phase1_mix_total += step.mix_total;
  acc.phase1_total += step.total;
  ++acc.phase1_steps;
}

inline void average_phase(EpochLosses& acc) {
  if (acc.phase1_steps > 0) {
    const double n = acc.phase1_steps;
    for (Modality task : kTasks) acc.phase1_reg.at(task) /= n;
    acc.phase1_reg_total /= n;
    acc.phase1_mix_a /= n;
    acc.phase1_mix_v /= n;
    acc.phase1_mix_total /= n;
    acc.phase1_total /= n;
  }
  if (acc.phase2_steps > 0) {
    const double n = acc.phase2_steps;
    for (Modality task : kTasks) acc.phase2_reg.at(task) /= n;
    acc.phase2_reg_total /= n;
  }
}

}  // namespace train_detail

// One mixed (labeled + unlabeled) pass with regression + consistency losses,
// followed by one supervised-only regression pass. Parameters update after
// every mini-batch.
template <typename S>
EpochLosses train_epoch_semi(TrainState<S>& state, const Dataset& dataset, const TrainConfig& tc) {
  if (dataset.stats().n_train == 0) throw ConfigError("train_epoch_semi: empty train split");
  EpochLosses acc;
  const bool mix = tc.mixup_enabled();
  for (const Batch& batch :
       make_batches(dataset, {Split::train, Split::unlabeled}, tc.batch_size, true,
                    &state.data_rng)) {
    std::optional<MixupDraw> draw;
    if (mix) draw = make_mixup_draw(batch.size(), tc.mixup, state.mixup_rng);
    const StepLosses step = phase1_step(state.model, batch, tc, draw ? &*draw : nullptr,
                                        &state.dropout_rng, /*with_grad=*/true);
    clip_gradients(state.model, tc.grad_clip_norm);
    state.optimizer.step(state.model);
    ++state.optimizer_steps;
    train_detail::accumulate_phase1<S>(acc, step);
  }
  for (const Batch& batch :
       make_batches(dataset, {Split::train}, tc.batch_size, true, &state.data_rng)) {
    const StepLosses step =
        phase2_step(state.model, batch, tc, &state.dropout_rng, /*with_grad=*/true);
    clip_gradients(state.model, tc.grad_clip_norm);
    state.optimizer.step(state.model);
    ++state.optimizer_steps;
    for (Modality task : kTasks) acc.phase2_reg.at(task) += step.reg.at(task);
    acc.phase2_reg_total += step.reg_total;
    ++acc.phase2_steps;
  }
  train_detail::average_phase(acc);
  ++state.epoch;
  return acc;
}

// Single loop over supervised batches optimizing regression + consistency
// (mixup pairs drawn from supervised instances only).
template <typename S>
EpochLosses train_epoch_supervised(TrainState<S>& state, const Dataset& dataset,
                                   const TrainConfig& tc) {
  if (dataset.stats().n_train == 0) throw ConfigError("train_epoch_supervised: empty train split");
  EpochLosses acc;
  const bool mix = tc.mixup_enabled();
  for (const Batch& batch :
       make_batches(dataset, {Split::train}, tc.batch_size, true, &state.data_rng)) {
    std::optional<MixupDraw> draw;
    if (mix) draw = make_mixup_draw(batch.size(), tc.mixup, state.mixup_rng);
    const StepLosses step = phase1_step(state.model, batch, tc, draw ? &*draw : nullptr,
                                        &state.dropout_rng, /*with_grad=*/true);
    clip_gradients(state.model, tc.grad_clip_norm);
    state.optimizer.step(state.model);
    ++state.optimizer_steps;
    train_detail::accumulate_phase1<S>(acc, step);
  }
  train_detail::average_phase(acc);
  ++state.epoch;
  return acc;
}

// ---------------------------------------------------------------------------
// Early stopping and fit
// ---------------------------------------------------------------------------

struct EarlyStopper {
  int patience = 1;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  // Returns true when `value` strictly improves on the best so far.
  bool observe(int epoch, double value) {
    if (value < best) {
      best = value;
      best_epoch = epoch;
      stale = 0;
      return true;
    }
    ++stale;
    return false;
  }

  bool should_stop() const { return stale >= patience; }
};

namespace train_detail {

inline nlohmann::json epoch_record(int epoch, const EpochLosses& el, bool semi,
                                   const MetricsReport& valid_m) {
  nlohmann::json rec;
  rec["epoch"] = epoch;
  nlohmann::json p1;
  p1["reg"] = {{"m", el.phase1_reg.m}, {"t", el.phase1_reg.t}, {"a", el.phase1_reg.a},
               {"v", el.phase1_reg.v}};
  p1["reg_total"] = el.phase1_reg_total;
  p1["mix"] = {{"a", el.phase1_mix_a}, {"v", el.phase1_mix_v}};
  p1["mix_total"] = el.phase1_mix_total;
  p1["total"] = el.phase1_total;
  p1["steps"] = el.phase1_steps;
  rec["phase1"] = std::move(p1);
  if (semi) {
    nlohmann::json p2;
    p2["reg"] = {{"m", el.phase2_reg.m}, {"t", el.phase2_reg.t}, {"a", el.phase2_reg.a},
                 {"v", el.phase2_reg.v}};
    p2["reg_total"] = el.phase2_reg_total;
    p2["steps"] = el.phase2_steps;
    rec["phase2"] = std::move(p2);
  } else {
    rec["phase2"] = nullptr;
  }
  rec["valid"] = metrics_to_json(valid_m);
  return rec;
}

}  // namespace train_detail

// Runs epochs until max_epochs or until validation MAE on the multimodal
// task stops improving for `early_stop_patience` epochs. The returned
// state's model holds the best-validation parameters.
template <typename S = float>
TrainState<S> fit(const Dataset& dataset, const ModelConfig& mc, const TrainConfig& tc,
                  std::uint64_t seed) {
  tc.validate();
  mc.validate();
  if (dataset.stats().n_train == 0) throw ConfigError("fit: dataset has no train split");
  if (dataset.stats().n_valid == 0) throw ConfigError("fit: dataset has no valid split");

  TrainState<S> state = init_train_state<S>(dataset.specs(), mc, tc, seed);
  Model<S> best_model = state.model;
  EarlyStopper stopper{tc.early_stop_patience};

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const bool semi = tc.mode == TrainMode::semi;
    const EpochLosses el = semi ? train_epoch_semi(state, dataset, tc)
                                : train_epoch_supervised(state, dataset, tc);
    const MetricsReport valid_m =
        evaluate(state.model, dataset, Split::valid, {Modality::multimodal}, "multimodal",
                 tc.batch_size)[0];
    state.history.push_back(train_detail::epoch_record(epoch, el, semi, valid_m));
    if (stopper.observe(epoch, valid_m.mae)) {
      best_model = state.model;
      state.best_valid_mae = valid_m.mae;
      state.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  state.model = best_model;
  return state;
}

}  // namespace avmc
