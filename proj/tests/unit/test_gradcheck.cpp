#include <catch2/catch_amalgamated.hpp>

#include "../support/test_util.hpp"
#include "avmc/training.hpp"

using namespace avmc;

namespace {

struct GradCheckSetup {
  PerFeature<FeatureSpec> specs = avmc_test::tiny_specs();
  std::vector<Instance> instances;
  TrainConfig tc;
  MixupDraw draw;

  explicit GradCheckSetup(Activation act) {
    RandomSource rng(101);
    instances.push_back(avmc_test::random_instance(specs, "g0", Split::train, rng));
    instances.push_back(avmc_test::random_instance(specs, "g1", Split::train, rng));
    instances.push_back(avmc_test::random_instance(specs, "g2", Split::unlabeled, rng));
    // Labels away from the predictions so the L1 kinks sit far from the
    // finite-difference step.
    instances[0].labels = LabelSet{0.6f, -0.4f, 0.8f, -0.6f};
    instances[1].labels = LabelSet{-0.8f, 0.4f, -0.2f, 1.0f};

    tc.batch_size = 3;
    tc.loss_weights.alpha = {1.0, 0.7, 0.6, 0.5};
    tc.loss_weights.beta.a = 0.9;
    tc.loss_weights.beta.v = 0.8;
    tc.mixup.beta_alpha = 0.5;

    draw.lambda = 0.37;
    draw.permutation = {2, 0, 1};

    (void)act;
  }

  ModelConfig model_config(Activation act) const {
    ModelConfig mc = avmc_test::tiny_model_config();
    mc.activation = act;
    return mc;
  }
};

// Every trainable parameter of the full phase-1 objective against central
// finite differences (step 1e-4). The relative tolerance is 1e-3; an
// absolute floor of 1e-8 covers parameters whose gradient is numerically
// zero on both routes.
void check_gradients(Activation act, bool stop_gradient) {
  GradCheckSetup setup(act);
  const ModelConfig mc = setup.model_config(act);
  TrainConfig tc = setup.tc;
  tc.mixup.target_stop_gradient = stop_gradient;

  RandomSource init(77);
  const Model<double> base = Model<double>::init(setup.specs, mc, init);
  const Batch batch =
      make_batch({&setup.instances[0], &setup.instances[1], &setup.instances[2]});

  // Pin the consistency targets at the base point when stop-gradient
  // semantics apply; the finite-difference objective must hold them fixed.
  FrozenTargets<double> frozen;
  if (stop_gradient) {
    Model<double> probe = base;
    auto fr = probe.forward(batch, true);
    frozen.a = mixup_batch(fr.F_a, fr.yhat[2], setup.draw).targets;
    frozen.v = mixup_batch(fr.F_v, fr.yhat[3], setup.draw).targets;
  }
  const FrozenTargets<double>* frozen_ptr = stop_gradient ? &frozen : nullptr;

  Model<double> analytic = base;
  phase1_step(analytic, batch, tc, &setup.draw, nullptr, /*with_grad=*/true, frozen_ptr);
  auto views = analytic.params();

  const double h = 1e-4;
  auto loss_at = [&](std::size_t view_idx, Eigen::Index elem, double delta) {
    Model<double> m = base;
    auto mviews = m.params();
    mviews[view_idx].value[elem] += delta;
    return phase1_step(m, batch, tc, &setup.draw, nullptr, /*with_grad=*/false, frozen_ptr).total;
  };

  double worst = 0.0;
  std::string worst_name;
  long total = 0, active = 0;
  for (std::size_t k = 0; k < views.size(); ++k) {
    if (!views[k].trainable) continue;
    for (Eigen::Index i = 0; i < views[k].size(); ++i) {
      ++total;
      const double analytic_g = views[k].grad[i];
      const double fd = (loss_at(k, i, h) - loss_at(k, i, -h)) / (2.0 * h);
      const double abs_err = std::abs(analytic_g - fd);
      const double rel = abs_err / std::max({std::abs(analytic_g), std::abs(fd), 1e-8});
      if (abs_err > 1e-8 && rel > worst) {
        worst = rel;
        worst_name = views[k].name + "[" + std::to_string(i) + "]";
      }
      if (abs_err > 1e-8) {
        INFO(views[k].name << "[" << i << "] analytic=" << analytic_g << " fd=" << fd);
        REQUIRE(rel < 1e-3);
      }
      if (std::abs(analytic_g) > 1e-12) ++active;
    }
  }
  INFO("worst relative error " << worst << " at " << worst_name);
  // Guard against a vacuous pass: a healthy share of the parameters must
  // carry gradient (relu configurations lose some to dead units).
  REQUIRE(total > 400);
  REQUIRE(active > total / 3);
}

}  // namespace

TEST_CASE("phase-1 gradients match finite differences (relu, stop-gradient)", "[gradcheck]") {
  check_gradients(Activation::relu, true);
}

TEST_CASE("phase-1 gradients match finite differences (tanh, stop-gradient)", "[gradcheck]") {
  check_gradients(Activation::tanh, true);
}

TEST_CASE("phase-1 gradients match finite differences through the targets", "[gradcheck]") {
  // With stop-gradient disabled the finite differences naturally include the
  // interpolated-target path.
  check_gradients(Activation::tanh, false);
}

TEST_CASE("supervised-pass gradients match finite differences", "[gradcheck]") {
  GradCheckSetup setup(Activation::relu);
  const ModelConfig mc = setup.model_config(Activation::relu);
  RandomSource init(78);
  const Model<double> base = Model<double>::init(setup.specs, mc, init);
  const Batch batch =
      make_batch({&setup.instances[0], &setup.instances[1], &setup.instances[2]});

  Model<double> analytic = base;
  phase2_step(analytic, batch, setup.tc, nullptr, /*with_grad=*/true);
  auto views = analytic.params();

  const double h = 1e-4;
  for (std::size_t k = 0; k < views.size(); ++k) {
    if (!views[k].trainable) continue;
    for (Eigen::Index i = 0; i < views[k].size(); ++i) {
      auto loss_at = [&](double delta) {
        Model<double> m = base;
        auto mviews = m.params();
        mviews[k].value[i] += delta;
        return phase2_step(m, batch, setup.tc, nullptr, /*with_grad=*/false).total;
      };
      const double fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
      const double analytic_g = views[k].grad[i];
      const double abs_err = std::abs(analytic_g - fd);
      if (abs_err > 1e-8) {
        const double rel = abs_err / std::max({std::abs(analytic_g), std::abs(fd), 1e-8});
        INFO(views[k].name << "[" << i << "] analytic=" << analytic_g << " fd=" << fd);
        REQUIRE(rel < 1e-3);
      }
    }
  }
}
