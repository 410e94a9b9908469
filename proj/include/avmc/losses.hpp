#pragma once

#include <cstdint>
#include <vector>

#include "avmc/layers.hpp"
#include "avmc/types.hpp"

namespace avmc {

template <typename S>
inline S sign_of(S x) {
  return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0));
}

// Mean absolute error over masked instances only; 0 when the mask is empty.
// Optionally fills the gradient w.r.t. the predictions.
template <typename S>
S regression_loss(const Vec<S>& predictions, const std::vector<float>& labels,
                  const std::vector<std::uint8_t>& mask, Vec<S>* dpred = nullptr) {
  const auto n = static_cast<std::size_t>(predictions.size());
  if (labels.size() != n || mask.size() != n) {
    throw ShapeError("regression_loss: prediction/label/mask lengths differ");
  }
  if (dpred) *dpred = Vec<S>::Zero(predictions.size());
  int n_masked = 0;
  for (std::uint8_t m : mask) n_masked += m ? 1 : 0;
  if (n_masked == 0) return S(0);
  S total = S(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const S err = predictions[static_cast<Eigen::Index>(i)] - S(labels[i]);
    total += err < S(0) ? -err : err;
    if (dpred) (*dpred)[static_cast<Eigen::Index>(i)] = sign_of(err) / S(n_masked);
  }
  return total / S(n_masked);
}

// Weighted sum of the four per-task regression losses.
inline double total_regression_loss(const PerTask<double>& losses, const LossWeights& weights) {
  double total = 0.0;
  for (Modality task : kTasks) total += weights.alpha.at(task) * losses.at(task);
  return total;
}

// Mean absolute difference between mixed-pass predictions and interpolated
// targets. The target is a constant: the gradient, when requested, is taken
// w.r.t. the predictions only.
template <typename S>
S consistency_loss(const Vec<S>& mixed_predictions, const Vec<S>& mixed_targets,
                   Vec<S>* dpred = nullptr) {
  if (mixed_predictions.size() != mixed_targets.size()) {
    throw ShapeError("consistency_loss: prediction/target lengths differ");
  }
  const auto n = mixed_predictions.size();
  if (n == 0) throw ValidationError("consistency_loss: empty batch");
  if (dpred) dpred->resize(n);
  S total = S(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S err = mixed_predictions[i] - mixed_targets[i];
    total += err < S(0) ? -err : err;
    if (dpred) (*dpred)[i] = sign_of(err) / S(n);
  }
  return total / S(n);
}

// Weighted sum of the acoustic and visual consistency losses.
inline double total_consistency_loss(double loss_a, double loss_v, const LossWeights& weights) {
  return weights.beta.a * loss_a + weights.beta.v * loss_v;
}

}  // namespace avmc
