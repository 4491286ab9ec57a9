#include "doctest.h"

#include <atd/datagen.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"

using namespace atd;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("disk sizes") {
    CHECK(disk_pixel_count(0) == 1);
    CHECK(disk_pixel_count(1) == 5);
    CHECK(disk_pixel_count(3) == 29);
    CHECK(disk_pixel_count(4) == 49);
  }

  TEST_CASE("balls are disjoint, binary and fully inside the grid") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      BallsOptions opt;
      opt.seed = seed;
      const SearchTask t = gen_balls_task(opt);
      CHECK(t.budget == 250);
      CHECK(t.grid.candidates() == 1024);
      CHECK(((t.target_mask == 0.0) || (t.target_mask == 1.0)).all());
      CHECK((t.content == t.target_mask).all());
      const double total = t.total_target_pixels();
      const bool r3 = std::fmod(total, 29.0) == 0.0 && total / 29.0 >= 5 && total / 29.0 <= 10;
      const bool r4 = std::fmod(total, 49.0) == 0.0 && total / 49.0 >= 5 && total / 49.0 <= 10;
      CHECK((r3 || r4));
    }
  }

  TEST_CASE("fixed count and radius") {
    BallsOptions opt;
    opt.count = 7;
    opt.radius = 3;
    opt.seed = 4;
    const SearchTask t = gen_balls_task(opt);
    CHECK(t.total_target_pixels() == 7 * 29);
    CHECK(t.discoverable() == 7 * 29);
    const SearchTask again = gen_balls_task(opt);
    CHECK((again.content == t.content).all());
    opt.seed = 5;
    CHECK_FALSE((gen_balls_task(opt).content == t.content).all());
  }

  TEST_CASE("crowded placements either fit exactly or fail loudly") {
    BallsOptions opt;
    opt.count = 10;
    opt.radius = 4;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      opt.seed = seed;
      try {
        CHECK(gen_balls_task(opt).total_target_pixels() == 490);
      } catch (const PlacementFailure&) {
        CHECK(true);
      }
    }
    opt.height = opt.width = 12;
    CHECK_THROWS_AS(gen_balls_task(opt), PlacementFailure);
    opt.height = opt.width = 8;
    CHECK_THROWS_AS(gen_balls_task(opt), InvalidArgument);
  }

  TEST_CASE("patched balls tasks") {
    BallsOptions opt;
    opt.patch = 2;
    opt.budget = 40;
    opt.seed = 3;
    const SearchTask t = gen_balls_task(opt);
    CHECK(t.grid.candidates() == 256);
    double sum = 0.0;
    for (int q = 0; q < 256; ++q) sum += t.outcome(q) * 4.0;
    CHECK(sum == doctest::Approx(t.total_target_pixels()));
  }

  TEST_CASE("species ingestion bins with north at the top") {
    const Region reg{0.0, 1.0, 0.0, 1.0};
    const SpeciesGrid g = ingest_species({{0.5, 0.5, 3.0}}, reg);
    CHECK((g.counts != 0.0).count() == 1);
    CHECK(g.counts.sum() == 3.0);
    const SpeciesGrid north = ingest_species({{0.99, 0.01, 1.0}, {0.99, 0.01, 2.0}}, reg, 4, 4);
    CHECK(north.counts(0) == 3.0);
    const SpeciesGrid south = ingest_species({{0.01, 0.99, 1.0}}, reg, 4, 4);
    CHECK(south.counts(15) == 1.0);
  }

  TEST_CASE("species ingestion skips bad records") {
    const Region reg{10.0, 20.0, 30.0, 40.0};
    const SpeciesGrid g = ingest_species({{15, 35, 1}, {25, 35, 1}, {15, 45, 1}, {15, 35, -2}}, reg);
    CHECK(g.used == 1);
    CHECK(g.skipped == 3);
    CHECK(g.counts.sum() == 1.0);
    CHECK_THROWS_AS(ingest_species({}, reg), InvalidArgument);
  }

  TEST_CASE("uniform scatter fills the grid evenly") {
    Rng rng(17);
    std::vector<SpeciesRecord> recs;
    for (int i = 0; i < 10000; ++i) recs.push_back({rng.uniform(), rng.uniform(), 1.0});
    const SpeciesGrid g = ingest_species(recs, Region{});
    CHECK(g.counts.sum() == 10000.0);
    const double mean = 10000.0 / 4096.0;
    CHECK(std::abs(g.counts.mean() - mean) < 1e-12);
    // Row totals are binomial(10^4, 1/64).
    const double row_mean = 10000.0 / 64.0, row_sd = std::sqrt(10000.0 / 64.0 * 63.0 / 64.0);
    for (int r = 0; r < 64; ++r) CHECK(std::abs(g.counts.segment(r * 64, 64).sum() - row_mean) < 4.0 * row_sd);
  }

  TEST_CASE("species task from a hand grid") {
    SpeciesGrid g;
    g.rows = g.cols = 4;
    g.counts.resize(16);
    g.counts << 0, 1, 5, 5,  //
        0, 0, 5, 2,          //
        8, 0, 0, 0,          //
        0, 0, 0, 1;
    const SearchTask t = species_to_task(g, 2, 3);
    CHECK(t.grid.candidates() == 4);
    CHECK(t.content.maxCoeff() == 1.0);
    CHECK(t.content(8) == 1.0);
    CHECK(t.content(2) == doctest::Approx(5.0 / 8.0));
    CHECK(t.outcome(0) == 0.0);
    CHECK(t.outcome(1) == 1.0);
    CHECK(t.outcome(2) == 0.25);
    CHECK(t.outcome(3) == 0.0);
    double sum = 0.0;
    for (int q = 0; q < 4; ++q) sum += t.outcome(q) * 4.0;
    CHECK(sum == t.total_target_pixels());
    CHECK(t.total_target_pixels() == 5.0);

    SpeciesGrid flat = g;
    flat.counts.setConstant(3.0);
    const SearchTask all = species_to_task(flat, 1, 2);
    for (int q = 0; q < 4; ++q) CHECK(all.outcome(q) == 1.0);
  }

  TEST_CASE("species csv parsing") {
    const auto with_header = write_temp("atd_species_a.csv", "lat,lon,count\n0.5,0.5,2\nbad,row\n0.1,0.2,1\n");
    std::size_t malformed = 0;
    const auto recs = read_species_csv(with_header, &malformed);
    CHECK(recs.size() == 2);
    CHECK(malformed == 1);
    CHECK(recs[0].count == 2.0);
    const auto bare = write_temp("atd_species_b.csv", "0.5,0.5,2\n");
    CHECK(read_species_csv(bare).size() == 1);
    CHECK(ingest_species_csv(bare, Region{}, 8, 8).counts.sum() == 2.0);
    CHECK_THROWS(read_species_csv(std::filesystem::temp_directory_path() / "atd_missing_species.csv"));
    std::filesystem::remove(with_header);
    std::filesystem::remove(bare);
  }

  TEST_CASE("mixture draws follow the mixture marginals") {
    GaussianMixture m;
    m.means.resize(2, 3);
    m.means << 0.0, 1.0, 0.5, 1.0, 0.0, 0.5;
    m.weights = Eigen::Vector2d(0.3, 0.7);
    m.variances = Eigen::Vector2d(0.05, 0.05);
    const int n = 2000;
    const TrainBuffer buf = sample_mixture(m, n, 6);
    REQUIRE(buf.size() == static_cast<std::size_t>(n));
    for (int px = 0; px < 3; ++px) {
      std::vector<double> xs;
      for (const Field& f : buf.samples()) xs.push_back(f(px));
      std::sort(xs.begin(), xs.end());
      double d = 0.0;
      for (int i = 0; i < n; ++i) {
        double cdf = 0.0;
        for (int k = 0; k < 2; ++k) cdf += m.weights(k) * normal_cdf((xs[static_cast<std::size_t>(i)] - m.means(k, px)) / std::sqrt(0.05));
        d = std::max({d, std::abs(cdf - static_cast<double>(i + 1) / n), std::abs(cdf - static_cast<double>(i) / n)});
      }
      CHECK(d < 1.63 / std::sqrt(static_cast<double>(n)));
    }
    CHECK(sample_mixture(m, 1, 6).size() == 1);
    CHECK((sample_mixture(m, 5, 6).as_batch() == sample_mixture(m, 5, 6).as_batch()).all());
  }

  TEST_CASE("corpora") {
    CHECK(parse_corpus_kind(to_string(CorpusKind::DigitsLike)) == CorpusKind::DigitsLike);
    CHECK_THROWS_AS(parse_corpus_kind("cifar"), InvalidArgument);
    const TrainBuffer digits = gen_prior_corpus(CorpusKind::DigitsLike, 20, 1);
    CHECK(digits.size() == 20);
    for (const Field& f : digits.samples()) {
      CHECK(f.minCoeff() >= 0.0);
      CHECK(f.maxCoeff() <= 1.0);
      CHECK(f.sum() > 0.0);
    }
    const TrainBuffer balls = gen_prior_corpus(CorpusKind::Balls, 3, 1, {32, 32, std::nullopt});
    CHECK(balls.pixels() == 1024);
    const GaussianMixture mix = balls_mixture(4, 0.05, 2);
    CHECK(mix.components() == 4);
    CHECK(mix.dim() == 1024);
    const TrainBuffer draws = gen_prior_corpus(CorpusKind::GmmDraws, 4, 9, {32, 32, mix});
    CHECK((draws.as_batch() == gen_prior_corpus(CorpusKind::GmmDraws, 4, 9, {32, 32, mix}).as_batch()).all());
    for (const Field& f : draws.samples()) {
      // Squared distance to the generating mean is 0.05 * chi2(1024), about 51.
      double nearest = 1e300;
      for (Index k = 0; k < 4; ++k) nearest = std::min(nearest, (f - mix.means.row(k).transpose().array()).square().sum());
      CHECK(nearest < 70.0);
    }
    Rng rng(1);
    for (int d = 0; d < 10; ++d) CHECK(digit_glyph(d, rng).size() == 1024);
    CHECK_THROWS_AS(digit_glyph(10, rng), InvalidArgument);
  }
}
