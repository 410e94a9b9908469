#include <catch2/catch_amalgamated.hpp>

#include "avmc/losses.hpp"

using namespace avmc;

TEST_CASE("masked regression loss", "[losses]") {
  SECTION("perfect predictions give zero") {
    Vec<double> pred(3);
    pred << 0.25, -0.5, 1.0;
    REQUIRE(regression_loss(pred, {0.25f, -0.5f, 1.0f}, {1, 1, 1}) == 0.0);
  }
  SECTION("single instance") {
    Vec<double> pred(1);
    pred << 0.5;
    REQUIRE(regression_loss(pred, {0.0f}, {1}) == Catch::Approx(0.5));
  }
  SECTION("masked instances are ignored") {
    Vec<double> pred(4);
    pred << 0.2, 0.4, 9.0, 9.0;
    Vec<double> grad;
    const double loss = regression_loss(pred, {0.0f, 0.0f, 0.0f, 0.0f}, {1, 1, 0, 0}, &grad);
    REQUIRE(loss == Catch::Approx(0.3));
    REQUIRE(grad[0] == Catch::Approx(0.5));   // sign/2
    REQUIRE(grad[1] == Catch::Approx(0.5));
    REQUIRE(grad[2] == 0.0);
    REQUIRE(grad[3] == 0.0);
  }
  SECTION("empty mask gives zero, not NaN") {
    Vec<double> pred(2);
    pred << 1.0, -1.0;
    Vec<double> grad;
    REQUIRE(regression_loss(pred, {0.0f, 0.0f}, {0, 0}, &grad) == 0.0);
    REQUIRE(grad.isZero());
  }
  SECTION("length mismatch") {
    Vec<double> pred(2);
    pred << 0.0, 0.0;
    REQUIRE_THROWS_AS(regression_loss(pred, {0.0f}, {1, 1}), ShapeError);
  }
}

TEST_CASE("weighted total regression loss", "[losses]") {
  LossWeights w;
  PerTask<double> losses{0.1, 0.2, 0.3, 0.4};
  REQUIRE(total_regression_loss(losses, w) == Catch::Approx(1.0));

  w.alpha = {1.0, 0.0, 0.0, 0.0};
  PerTask<double> only_m{0.25, 9.0, 9.0, 9.0};
  REQUIRE(total_regression_loss(only_m, w) == Catch::Approx(0.25));

  w.alpha = {1.0, 0.5, 0.5, 0.5};
  PerTask<double> flat{0.2, 0.2, 0.2, 0.2};
  REQUIRE(total_regression_loss(flat, w) == Catch::Approx(0.5));
}

TEST_CASE("consistency loss", "[losses]") {
  SECTION("identical predictions and targets give zero") {
    Vec<double> p(3), t(3);
    p << 0.1, -0.2, 0.7;
    t = p;
    REQUIRE(consistency_loss(p, t) == 0.0);
  }
  SECTION("mean absolute difference") {
    Vec<double> p(2), t(2);
    p << 0.5, -0.5;
    t << 0.0, 0.0;
    Vec<double> grad;
    REQUIRE(consistency_loss(p, t, &grad) == Catch::Approx(0.5));
    REQUIRE(grad[0] == Catch::Approx(0.5));
    REQUIRE(grad[1] == Catch::Approx(-0.5));
  }
  SECTION("empty batch is rejected") {
    Vec<double> p(0), t(0);
    REQUIRE_THROWS_AS(consistency_loss(p, t), ValidationError);
  }
}

TEST_CASE("weighted total consistency loss covers the ablation modes", "[losses]") {
  LossWeights w;
  REQUIRE(total_consistency_loss(0.1, 0.3, w) == Catch::Approx(0.4));
  w.beta.a = 0.0;  // acoustic mixup disabled
  REQUIRE(total_consistency_loss(0.1, 0.3, w) == Catch::Approx(0.3));
  w.beta.v = 0.0;  // both disabled
  REQUIRE(total_consistency_loss(0.1, 0.3, w) == 0.0);
}
