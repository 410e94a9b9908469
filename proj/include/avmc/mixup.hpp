#pragma once

#include <numeric>
#include <vector>

#include "avmc/layers.hpp"
#include "avmc/rng.hpp"
#include "avmc/types.hpp"

namespace avmc {

// One mixing decision: a single lambda per batch and one pairing
// permutation, shared by the acoustic and visual streams within a step.
struct MixupDraw {
  double lambda = 1.0;
  std::vector<int> permutation;

  void validate(int batch_size) const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("MixupDraw: lambda outside [0, 1]");
    if (static_cast<int>(permutation.size()) != batch_size) {
      throw ShapeError("MixupDraw: permutation size " + std::to_string(permutation.size()) +
                       " does not match batch size " + std::to_string(batch_size));
    }
    std::vector<bool> seen(permutation.size(), false);
    for (int p : permutation) {
      if (p < 0 || p >= batch_size || seen[static_cast<std::size_t>(p)]) {
        throw ValidationError("MixupDraw: permutation is not a bijection");
      }
      seen[static_cast<std::size_t>(p)] = true;
    }
  }
};

inline double sample_lambda(const MixupConfig& config, RandomSource& rng) {
  config.validate();
  return rng.beta(config.beta_alpha, config.beta_alpha);
}

// Uniformly sampled permutation of {0..n-1}; fixed points permitted.
inline std::vector<int> shuffle_pairing(int n, RandomSource& rng) {
  if (n < 1) throw ValidationError("shuffle_pairing: n must be >= 1");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n; i > 1; --i) {
    const int j = static_cast<int>(rng.uniform_int(i));
    std::swap(perm[static_cast<std::size_t>(i - 1)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

inline MixupDraw make_mixup_draw(int batch_size, const MixupConfig& config, RandomSource& rng) {
  MixupDraw draw;
  draw.lambda = sample_lambda(config, rng);
  draw.permutation = shuffle_pairing(batch_size, rng);
  return draw;
}

// Interpolated representations and targets for one modality stream.
template <typename S>
struct MixedBatch {
  Mat<S> reps;     // [h x B]
  Vec<S> targets;  // length B
};

// F''_i = lambda * F_i + (1-lambda) * F_perm(i); same combination for the
// targets. Targets are interpolated model predictions, never ground-truth
// labels, so unlabeled instances participate identically.
template <typename S>
MixedBatch<S> mixup_batch(const Mat<S>& reps, const Vec<S>& targets, const MixupDraw& draw) {
  const int B = static_cast<int>(reps.cols());
  if (targets.size() != B) {
    throw ShapeError("mixup_batch: " + std::to_string(reps.cols()) + " representations vs " +
                     std::to_string(targets.size()) + " targets");
  }
  draw.validate(B);
  const S lam = static_cast<S>(draw.lambda);
  MixedBatch<S> out;
  out.reps.resize(reps.rows(), B);
  out.targets.resize(B);
  for (int i = 0; i < B; ++i) {
    const int j = draw.permutation[static_cast<std::size_t>(i)];
    out.reps.col(i) = lam * reps.col(i) + (S(1) - lam) * reps.col(j);
    out.targets[i] = lam * targets[i] + (S(1) - lam) * targets[j];
  }
  return out;
}

// Pullback of a gradient on the mixed representations onto the originals:
// dF_i = lambda * dF''_i + (1-lambda) * sum_{j: perm(j)=i} dF''_j.
template <typename S>
Mat<S> mixup_backward(const Mat<S>& d_mixed, const MixupDraw& draw) {
  const int B = static_cast<int>(d_mixed.cols());
  draw.validate(B);
  const S lam = static_cast<S>(draw.lambda);
  Mat<S> out = lam * d_mixed;
  for (int i = 0; i < B; ++i) {
    out.col(draw.permutation[static_cast<std::size_t>(i)]) += (S(1) - lam) * d_mixed.col(i);
  }
  return out;
}

// Same pullback for per-instance scalars (used when gradient is allowed to
// flow through the interpolated targets).
template <typename S>
Vec<S> mixup_backward_targets(const Vec<S>& d_mixed, const MixupDraw& draw) {
  const int B = static_cast<int>(d_mixed.size());
  draw.validate(B);
  const S lam = static_cast<S>(draw.lambda);
  Vec<S> out = lam * d_mixed;
  for (int i = 0; i < B; ++i) {
    out[draw.permutation[static_cast<std::size_t>(i)]] += (S(1) - lam) * d_mixed[i];
  }
  return out;
}

}  // namespace avmc
