#include "doctest.h"

#include <atd/domain.hpp>
#include <atd/rng.hpp>

#include <set>

using namespace atd;

namespace {

SearchTask random_task(Rng& rng, int h, int w, int ph, int pw, int budget) {
  Field content(h * w), mask(h * w);
  for (Index i = 0; i < content.size(); ++i) {
    mask(i) = rng.uniform() < 0.3 ? 1.0 : 0.0;
    content(i) = rng.uniform();
  }
  return make_task(content, mask, GridShape{h, w, ph, pw}, budget);
}

}  // namespace

TEST_SUITE("domain") {
  TEST_CASE("grid shape counts candidates and validates tiling") {
    GridShape g{32, 32, 2, 2};
    CHECK(g.candidates() == 256);
    CHECK_THROWS_AS((GridShape{32, 30, 4, 4}.validate()), InvalidArgument);
    CHECK_THROWS_AS((GridShape{0, 4, 1, 1}.validate()), InvalidArgument);
    const auto pix = GridShape{4, 4, 2, 2}.patch_pixels(3);
    CHECK(pix == std::vector<Index>{10, 11, 14, 15});
  }

  TEST_CASE("make_task bounds the budget by the candidate count") {
    const Field z = Field::Zero(32 * 32);
    CHECK_THROWS_AS(make_task(z, z, GridShape{32, 32, 2, 2}, 257), InvalidArgument);
    const SearchTask t = make_task(z, z, GridShape{32, 32, 1, 1}, 250);
    CHECK(t.grid.candidates() == 32 * 32);
    CHECK_THROWS_AS(make_task(z, z, GridShape{32, 32, 1, 1}, 0), InvalidArgument);
  }

  TEST_CASE("make_task rejects malformed content") {
    GridShape g{4, 4, 1, 1};
    const Field z = Field::Zero(16);
    CHECK_THROWS_AS(make_task(Field::Zero(15), z, g, 3), InvalidArgument);
    Field bad = z;
    bad(3) = 1.5;
    CHECK_THROWS_AS(make_task(bad, z, g, 3), InvalidArgument);
    Field half = z;
    half(0) = 0.5;
    CHECK_THROWS_AS(make_task(z, half, g, 3), InvalidArgument);
  }

  TEST_CASE("empty target gives zero outcomes everywhere") {
    const Field z = Field::Zero(64);
    const SearchTask t = make_task(Field::Constant(64, 0.7), z, GridShape{8, 8, 2, 2}, 5);
    for (int q = 0; q < t.grid.candidates(); ++q) CHECK(t.outcome(q) == 0.0);
  }

  TEST_CASE("query outcomes count target pixels in the patch") {
    Field mask = Field::Zero(16);
    mask(0) = mask(1) = mask(4) = mask(5) = 1.0;  // patch 0 full
    mask(10) = 1.0;                               // one pixel of patch 3
    const SearchTask t = make_task(mask, mask, GridShape{4, 4, 2, 2}, 4);
    ObservationSet obs(t.grid);
    auto [f0, o1] = query(t, obs, 0);
    CHECK(f0.outcome == 1.0);
    auto [f1, o2] = query(t, o1, 1);
    CHECK(f1.outcome == 0.0);
    auto [f3, o3] = query(t, o2, 3);
    CHECK(f3.outcome == 0.25);
    CHECK(f3.patch_values.size() == 4);
    CHECK(o3.queried() == std::vector<int>{0, 1, 3});
    CHECK(obs.empty());  // the original set is untouched
  }

  TEST_CASE("query errors") {
    const Field z = Field::Zero(16);
    const SearchTask t = make_task(z, z, GridShape{4, 4, 2, 2}, 2);
    ObservationSet obs(t.grid);
    CHECK_THROWS_AS(query(t, obs, 4), InvalidArgument);
    CHECK_THROWS_AS(query(t, obs, -1), InvalidArgument);
    auto [f, o] = query(t, obs, 1);
    CHECK_THROWS_AS(query(t, o, 1), DuplicateQuery);
    auto [f2, o2] = query(t, o, 2);
    CHECK_THROWS_AS(query(t, o2, 3), BudgetExhausted);
  }

  TEST_CASE("success rate examples") {
    Field mask = Field::Zero(16);
    for (int i = 0; i < 5; ++i) mask(i) = 1.0;
    const SearchTask t = make_task(mask, mask, GridShape{4, 4, 1, 1}, 2);
    REQUIRE(t.discoverable() == 5);
    const std::vector<SearchTask> tasks{t};
    CHECK(success_rate(std::vector<std::vector<double>>{{1.0, 1.0}}, tasks) == 1.0);
    CHECK(success_rate(std::vector<std::vector<double>>{{1.0, 0.0}}, tasks) == 0.5);
    CHECK_THROWS_AS(success_rate(std::vector<std::vector<double>>{}, std::vector<SearchTask>{}), InvalidArgument);
  }

  TEST_CASE("observations mirror queried patches exactly") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const SearchTask t = random_task(rng, 8, 8, 2, 2, 10);
      ObservationSet obs(t.grid);
      std::set<int> asked;
      while (static_cast<int>(asked.size()) < t.budget) {
        const int q = static_cast<int>(rng.uniform_index(t.grid.candidates()));
        if (asked.count(q)) continue;
        asked.insert(q);
        obs = query(t, obs, q).second;
      }
      Field expected_mask = Field::Zero(64);
      for (int q : asked)
        for (Index p : t.grid.patch_pixels(q)) expected_mask(p) = 1.0;
      CHECK((obs.mask() == expected_mask).all());
      CHECK(((obs.values() - t.content) * obs.mask()).abs().maxCoeff() == 0.0);
      CHECK((obs.values() * (1.0 - obs.mask())).abs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("target mass is conserved across all queries") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const int p = 1 + static_cast<int>(rng.uniform_index(3));
      const SearchTask t = random_task(rng, 6 * p, 6 * p, p, p, 1);
      double mass = 0.0;
      for (int q = 0; q < t.grid.candidates(); ++q) mass += t.outcome(q) * t.grid.patch_area();
      CHECK(mass == doctest::Approx(t.total_target_pixels()).epsilon(1e-12));
    }
  }

  TEST_CASE("success rate stays in [0, 1] and saturates at one") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const SearchTask t = random_task(rng, 8, 8, 2, 2, 1 + static_cast<int>(rng.uniform_index(16)));
      std::vector<double> outcomes;
      for (int q = 0; q < t.budget; ++q) outcomes.push_back(t.outcome(q));
      const double sr = success_rate(std::vector<std::vector<double>>{outcomes}, std::vector<SearchTask>{t});
      CHECK(sr >= 0.0);
      CHECK(sr <= 1.0);
    }
    Field mask = Field::Zero(16);
    mask.head(6) = 1.0;
    const SearchTask t = make_task(mask, mask, GridShape{4, 4, 1, 1}, 10);
    std::vector<double> saturated(6, 1.0);
    CHECK(success_rate(std::vector<std::vector<double>>{saturated}, std::vector<SearchTask>{t}) == 1.0);
  }
}
