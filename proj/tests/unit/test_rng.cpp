#include <catch2/catch_amalgamated.hpp>

#include "avmc/rng.hpp"

using avmc::RandomSource;

TEST_CASE("identical seeds produce identical draw sequences", "[rng]") {
  RandomSource a(7), b(7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.uniform() == b.uniform());
}

TEST_CASE("different seeds diverge", "[rng]") {
  RandomSource a(7), b(8);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) any_diff |= a.uniform() != b.uniform();
  REQUIRE(any_diff);
}

TEST_CASE("uniform draws lie in [0,1)", "[rng]") {
  RandomSource rng(1234);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("uniform_int stays within bounds and hits every value", "[rng]") {
  RandomSource rng(5);
  std::array<int, 7> counts{};
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_int(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) REQUIRE(c > 0);
  REQUIRE_THROWS_AS(rng.uniform_int(0), avmc::ValidationError);
}

TEST_CASE("normal draws have roughly standard moments", "[rng]") {
  RandomSource rng(99);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.03);
  REQUIRE(var == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("beta draws stay in [0,1] and are deterministic", "[rng]") {
  RandomSource a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = a.beta(0.5, 0.5);
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 1.0);
    REQUIRE(x == b.beta(0.5, 0.5));
  }
  REQUIRE_THROWS_AS(a.gamma(0.0), avmc::ValidationError);
}

TEST_CASE("forked streams are independent of the parent and each other", "[rng]") {
  RandomSource root(11);
  RandomSource c1 = root.fork(1);
  RandomSource c2 = root.fork(2);
  RandomSource c1_again = RandomSource(11).fork(1);
  bool diff12 = false;
  for (int i = 0; i < 50; ++i) {
    const double a = c1.uniform();
    diff12 |= a != c2.uniform();
    REQUIRE(a == c1_again.uniform());
  }
  REQUIRE(diff12);
}
