#pragma once

#include <cmath>
#include <vector>

#include "avmc/model.hpp"

namespace avmc {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("AdamConfig: betas must be in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("AdamConfig: eps must be positive");
  }
};

// Scales all trainable gradients so their global L2 norm is at most
// max_norm; returns the pre-clip norm.
template <typename S>
double clip_gradients(Model<S>& model, double max_norm) {
  auto views = model.params();
  double sq = 0.0;
  for (const auto& p : views) {
    if (!p.trainable) continue;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double g = static_cast<double>(p.grad[i]);
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (const auto& p : views) {
      if (!p.trainable) continue;
      for (Eigen::Index i = 0; i < p.size(); ++i) p.grad[i] *= scale;
    }
  }
  return norm;
}

// Adam with bias correction, no weight decay. Moment buffers follow the
// model's canonical parameter enumeration order.
template <typename S>
class Adam {
 public:
  Adam() = default;
  Adam(double learning_rate, AdamConfig cfg) : lr_(learning_rate), cfg_(cfg) { cfg_.validate(); }

  long step_count() const { return step_; }

  void step(Model<S>& model) {
    auto views = model.params();
    if (m_.empty()) {
      for (const auto& p : views) {
        m_.emplace_back(Vec<S>::Zero(p.trainable ? p.size() : 0));
        v_.emplace_back(Vec<S>::Zero(p.trainable ? p.size() : 0));
      }
    }
    if (m_.size() != views.size()) throw ShapeError("Adam: parameter set changed between steps");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const S b1 = S(cfg_.beta1), b2 = S(cfg_.beta2);
    for (std::size_t k = 0; k < views.size(); ++k) {
      const auto& p = views[k];
      if (!p.trainable) continue;
      if (m_[k].size() != p.size()) throw ShapeError("Adam: tensor '" + p.name + "' changed shape");
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const S g = p.grad[i];
        m_[k][i] = b1 * m_[k][i] + (S(1) - b1) * g;
        v_[k][i] = b2 * v_[k][i] + (S(1) - b2) * g * g;
        const double mhat = static_cast<double>(m_[k][i]) / bc1;
        const double vhat = static_cast<double>(v_[k][i]) / bc2;
        p.value[i] -= static_cast<S>(lr_ * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  double lr_ = 1e-3;
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Vec<S>> m_, v_;
};

}  // namespace avmc
