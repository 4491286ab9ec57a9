#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atd/domain.hpp"
#include "atd/permanent.hpp"

namespace atd {

struct BallsOptions {
  int height = 32;
  int width = 32;
  int min_count = 5;
  int max_count = 10;
  std::vector<int> radii{3, 4};
  int count = 0;   // > 0 fixes the ball count
  int radius = 0;  // > 0 fixes the radius
  int patch = 1;
  int budget = 250;
  int max_restarts = 200;
  std::uint64_t seed = 0;
};

/// Pixels in the disk dx^2 + dy^2 <= r^2.
int disk_pixel_count(int radius);

/// Balls image (content = target mask). One radius per task, balls pairwise
/// disjoint and inside the grid. Throws PlacementFailure when rejection
/// sampling gives up.
SearchTask gen_balls_task(const BallsOptions& opt);

struct Region {
  double lat_min = 0.0;
  double lat_max = 1.0;
  double lon_min = 0.0;
  double lon_max = 1.0;
};

struct SpeciesRecord {
  double lat = 0.0;
  double lon = 0.0;
  double count = 0.0;
};

/// Counts binned over a lat/lon box. Row 0 is the northern edge.
struct SpeciesGrid {
  int rows = 64;
  int cols = 64;
  Field counts;
  Region region;
  std::size_t used = 0;
  std::size_t skipped = 0;  // outside the region or negative count
};

SpeciesGrid ingest_species(const std::vector<SpeciesRecord>& records, const Region& region, int rows = 64,
                           int cols = 64);

/// Reads "lat,lon,count" rows; a non-numeric first line is treated as a header.
/// Malformed lines are counted in `*malformed` when given.
std::vector<SpeciesRecord> read_species_csv(const std::filesystem::path& path, std::size_t* malformed = nullptr);
SpeciesGrid ingest_species_csv(const std::filesystem::path& path, const Region& region, int rows = 64,
                               int cols = 64);

/// content = counts / max, target = counts >= threshold, 2x2 queries by default.
SearchTask species_to_task(const SpeciesGrid& grid, int threshold, int budget, int patch = 2);

enum class CorpusKind { GmmDraws, Balls, DigitsLike };

const char* to_string(CorpusKind kind);
CorpusKind parse_corpus_kind(const std::string& s);

/// Means are balls images drawn from `seed`, equal weights, shared variance.
GaussianMixture balls_mixture(int components, double variance, std::uint64_t seed, int height = 32, int width = 32);

/// n exact draws from the mixture (not clipped).
TrainBuffer sample_mixture(const GaussianMixture& mixture, int n, std::uint64_t seed);

/// Thick-stroke glyphs of the ten digits with random scale, shift, shear and
/// stroke width; values in [0, 1].
Field digit_glyph(int digit, Rng& rng, int height = 32, int width = 32);

struct CorpusOptions {
  int height = 32;
  int width = 32;
  std::optional<GaussianMixture> mixture;  // gmm-draws; defaults to balls_mixture(16, 0.05, seed)
};

TrainBuffer gen_prior_corpus(CorpusKind kind, int n, std::uint64_t seed, const CorpusOptions& opt = {});

}  // namespace atd
