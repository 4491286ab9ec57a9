#include "doctest.h"

#include <atd/rng.hpp>
#include <atd/schedule.hpp>

#include <cmath>
#include <cstring>

using namespace atd;

TEST_SUITE("schedule") {
  TEST_CASE("linear schedule invariants") {
    const NoiseSchedule s = NoiseSchedule::linear();
    CHECK(s.steps() == 30);
    CHECK(s.beta(0) == doctest::Approx(1e-4));
    CHECK(s.beta(29) == doctest::Approx(0.2));
    double prod = 1.0;
    for (int k = 0; k < s.steps(); ++k) {
      prod *= 1.0 - s.beta(k);
      CHECK(s.alpha_bar(k) == doctest::Approx(prod).epsilon(1e-14));
      if (k > 0) CHECK(s.alpha_bar(k) < s.alpha_bar(k - 1));
      CHECK(s.sigma(k) == 0.0);
    }
    CHECK(s.alpha_bar_prev(0) == 1.0);
    CHECK_THROWS_AS(s.alpha_bar(30), InvalidArgument);
    CHECK_THROWS_AS(s.alpha_bar(-1), InvalidArgument);
  }

  TEST_CASE("alpha_bar is monotone for arbitrary betas") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> betas(1 + rng.uniform_index(40));
      for (double& b : betas) b = 1e-6 + (1.0 - 2e-6) * rng.uniform();
      const NoiseSchedule s = NoiseSchedule::from_betas(betas, rng.uniform());
      for (int k = 1; k < s.steps(); ++k) CHECK(s.alpha_bar(k) < s.alpha_bar(k - 1));
      for (int k = 0; k < s.steps(); ++k) CHECK(s.sigma(k) * s.sigma(k) <= 1.0 - s.alpha_bar_prev(k) + 1e-15);
    }
    CHECK_THROWS_AS(NoiseSchedule::from_betas({0.5, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(NoiseSchedule::from_betas({0.0}), InvalidArgument);
  }

  TEST_CASE("eta sets sigma by the DDIM formula") {
    const NoiseSchedule s = NoiseSchedule::linear(30, 1e-4, 0.2, 0.7);
    for (int k = 1; k < s.steps(); ++k) {
      const double ab = s.alpha_bar(k), prev = s.alpha_bar(k - 1);
      const double expect = 0.7 * std::sqrt((1 - prev) / (1 - ab)) * std::sqrt(1 - ab / prev);
      CHECK(s.sigma(k) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("forward noise examples") {
    Field x0(1), e(1);
    x0 << 1.0;
    e << 0.5;
    const NoiseSchedule quarter = NoiseSchedule::from_betas({0.75});
    CHECK(forward_noise(quarter, x0, 0, e)(0) == doctest::Approx(0.5 * 1.0 + std::sqrt(0.75) * 0.5).epsilon(1e-12));
    CHECK(forward_noise(quarter, x0, 0, e)(0) == doctest::Approx(0.9330).epsilon(1e-4));
    const NoiseSchedule clean = NoiseSchedule::from_betas({1e-300});
    CHECK(forward_noise(clean, x0, 0, e)(0) == 1.0);
    const NoiseSchedule noisy = NoiseSchedule::from_betas({1.0 - 1e-15});
    CHECK(forward_noise(noisy, x0, 0, e)(0) == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("tweedie examples") {
    Field xt(1), eps(1);
    xt << 1.0;
    eps << 0.5;
    const NoiseSchedule quarter = NoiseSchedule::from_betas({0.75});
    CHECK(tweedie(quarter, xt, eps, 0)(0) == doctest::Approx((1.0 - std::sqrt(0.75) * 0.5) / 0.5).epsilon(1e-12));
    CHECK(tweedie(quarter, xt, eps, 0)(0) == doctest::Approx(1.1340).epsilon(1e-4));
    const NoiseSchedule clean = NoiseSchedule::from_betas({1e-300});
    CHECK(tweedie(clean, xt, eps, 0)(0) == 1.0);
  }

  TEST_CASE("tweedie inverts forward noise at every step") {
    const NoiseSchedule s = NoiseSchedule::linear();
    Rng rng(9);
    const Field x0 = rng.normal_field(64);
    const Field e = rng.normal_field(64);
    for (int k = 0; k < s.steps(); ++k) {
      const Field back = tweedie(s, forward_noise(s, x0, k, e), e, k);
      CHECK(((back - x0).abs() / x0.abs().max(1e-12)).maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("identity step when alpha_bar does not change") {
    Rng rng(4);
    const Field x = rng.normal_field(10), eps = rng.normal_field(10);
    const Field out = ddim_update(x, eps, 0.6, 0.6, 0.0, Field(Field::Zero(10)));
    CHECK((out - x).abs().maxCoeff() < 1e-12);
  }

  TEST_CASE("true noise gives the exact deterministic trajectory") {
    const NoiseSchedule s = NoiseSchedule::linear();
    Rng rng(6);
    const Field x0 = rng.normal_field(16), e = rng.normal_field(16);
    Field x = forward_noise(s, x0, s.steps() - 1, e);
    for (int k = s.steps() - 1; k >= 0; --k) {
      x = ddim_step(s, x, e, k, Field(Field::Zero(16)));
      const Field expect = k > 0 ? forward_noise(s, x0, k - 1, e) : x0;
      CHECK((x - expect).abs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("stochastic steps are reproducible under a fixed seed") {
    const NoiseSchedule s = NoiseSchedule::linear(30, 1e-4, 0.2, 1.0);
    auto run = [&](std::uint64_t seed) {
      Rng rng(seed);
      Field x = rng.normal_field(32);
      for (int k = s.steps() - 1; k >= 0; --k) {
        const Field noise = k > 0 ? rng.normal_field(32) : Field::Zero(32);
        x = ddim_step(s, x, Field(0.3 * x), k, noise);
      }
      return x;
    };
    const Field a = run(77), b = run(77);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 32) == 0);
  }

  TEST_CASE("negative radicand is rejected") {
    const Field x = Field::Ones(3);
    CHECK_THROWS_AS(ddim_update(x, x, 0.5, 0.9, 0.5, x), InvalidArgument);
  }

  TEST_CASE("hash separates schedules") {
    CHECK(NoiseSchedule::linear().hash() == NoiseSchedule::linear().hash());
    CHECK(NoiseSchedule::linear().hash() != NoiseSchedule::linear(20).hash());
    CHECK(NoiseSchedule::linear().hash() != NoiseSchedule::linear(30, 1e-4, 0.2, 0.5).hash());
  }
}
