#include "atd/datagen.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace atd {

int disk_pixel_count(int radius) {
  int n = 0;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) ++n;
  return n;
}

namespace {

bool stamp_disk(Field& mask, int height, int width, int cy, int cx, int r) {
  std::vector<Index> pix;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy > r * r) continue;
      const Index p = static_cast<Index>(cy + dy) * width + (cx + dx);
      if (mask(p) > 0.0) return false;
      pix.push_back(p);
    }
  (void)height;
  for (Index p : pix) mask(p) = 1.0;
  return true;
}

}  // namespace

SearchTask gen_balls_task(const BallsOptions& opt) {
  require(opt.height >= 1 && opt.width >= 1, "balls grid must be non-empty");
  require(opt.count > 0 || (opt.min_count >= 1 && opt.max_count >= opt.min_count), "invalid ball count range");
  require(opt.radius > 0 || !opt.radii.empty(), "no radius to choose from");
  Rng rng(opt.seed);
  const int count = opt.count > 0
                        ? opt.count
                        : opt.min_count + static_cast<int>(rng.uniform_index(opt.max_count - opt.min_count + 1));
  const int r = opt.radius > 0 ? opt.radius
                               : opt.radii[static_cast<std::size_t>(rng.uniform_index(
                                     static_cast<Index>(opt.radii.size())))];
  require(2 * r + 1 <= opt.height && 2 * r + 1 <= opt.width, "ball does not fit inside the grid");
  const int tries_per_ball = 1000;
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    Field mask = Field::Zero(static_cast<Index>(opt.height) * opt.width);
    int placed = 0;
    for (int attempt = 0; attempt < tries_per_ball * count && placed < count; ++attempt) {
      const int cy = r + static_cast<int>(rng.uniform_index(opt.height - 2 * r));
      const int cx = r + static_cast<int>(rng.uniform_index(opt.width - 2 * r));
      if (stamp_disk(mask, opt.height, opt.width, cy, cx, r)) ++placed;
    }
    if (placed == count) {
      GridShape grid{opt.height, opt.width, opt.patch, opt.patch};
      return make_task(mask, mask, grid, opt.budget);
    }
  }
  throw PlacementFailure("could not place " + std::to_string(count) + " disjoint balls of radius " +
                         std::to_string(r));
}

SpeciesGrid ingest_species(const std::vector<SpeciesRecord>& records, const Region& region, int rows, int cols) {
  require(!records.empty(), "no species records");
  require(region.lat_max > region.lat_min && region.lon_max > region.lon_min, "degenerate region");
  require(rows >= 1 && cols >= 1, "species grid must be non-empty");
  SpeciesGrid g;
  g.rows = rows;
  g.cols = cols;
  g.region = region;
  g.counts = Field::Zero(static_cast<Index>(rows) * cols);
  for (const auto& rec : records) {
    const bool inside = rec.lat >= region.lat_min && rec.lat <= region.lat_max && rec.lon >= region.lon_min &&
                        rec.lon <= region.lon_max;
    if (!inside || !(rec.count >= 0.0)) {
      ++g.skipped;
      continue;
    }
    const double fr = (region.lat_max - rec.lat) / (region.lat_max - region.lat_min);
    const double fc = (rec.lon - region.lon_min) / (region.lon_max - region.lon_min);
    const int r = std::min(rows - 1, static_cast<int>(fr * rows));
    const int c = std::min(cols - 1, static_cast<int>(fc * cols));
    g.counts(static_cast<Index>(r) * cols + c) += rec.count;
    ++g.used;
  }
  return g;
}

namespace {

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

std::vector<SpeciesRecord> read_species_csv(const std::filesystem::path& path, std::size_t* malformed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<SpeciesRecord> out;
  std::size_t bad = 0;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 3> v{};
    std::size_t start = 0;
    bool ok = true;
    for (int f = 0; f < 3; ++f) {
      const std::size_t end = f < 2 ? line.find(',', start) : line.size();
      if (end == std::string::npos || !parse_double(std::string_view(line).substr(start, end - start), v[f])) {
        ok = false;
        break;
      }
      start = end + 1;
    }
    if (ok) out.push_back({v[0], v[1], v[2]});
    else if (!first) ++bad;
    first = false;
  }
  if (malformed != nullptr) *malformed = bad;
  return out;
}

SpeciesGrid ingest_species_csv(const std::filesystem::path& path, const Region& region, int rows, int cols) {
  std::size_t malformed = 0;
  SpeciesGrid g = ingest_species(read_species_csv(path, &malformed), region, rows, cols);
  g.skipped += malformed;
  return g;
}

SearchTask species_to_task(const SpeciesGrid& grid, int threshold, int budget, int patch) {
  require(threshold >= 1, "species threshold must be at least 1");
  const double peak = grid.counts.maxCoeff();
  require(peak > 0.0, "species grid has no observations");
  const Field content = grid.counts / peak;
  const Field mask = (grid.counts >= static_cast<double>(threshold)).cast<double>();
  return make_task(content, mask, GridShape{grid.rows, grid.cols, patch, patch}, budget);
}

const char* to_string(CorpusKind kind) {
  switch (kind) {
    case CorpusKind::GmmDraws: return "gmm-draws";
    case CorpusKind::Balls: return "balls";
    case CorpusKind::DigitsLike: return "digits-like";
  }
  return "?";
}

CorpusKind parse_corpus_kind(const std::string& s) {
  if (s == "gmm-draws") return CorpusKind::GmmDraws;
  if (s == "balls") return CorpusKind::Balls;
  if (s == "digits-like") return CorpusKind::DigitsLike;
  throw InvalidArgument("unknown corpus kind '" + s + "'");
}

GaussianMixture balls_mixture(int components, double variance, std::uint64_t seed, int height, int width) {
  require(components >= 1 && variance > 0.0, "invalid mixture parameters");
  GaussianMixture m;
  m.means.resize(components, static_cast<Index>(height) * width);
  for (int k = 0; k < components; ++k) {
    BallsOptions opt;
    opt.height = height;
    opt.width = width;
    opt.budget = 1;
    opt.seed = derive_seed(seed, 0x6d6978ULL, static_cast<std::uint64_t>(k));
    m.means.row(k) = gen_balls_task(opt).content.matrix().transpose();
  }
  m.weights = Eigen::VectorXd::Constant(components, 1.0 / components);
  m.variances = Eigen::VectorXd::Constant(components, variance);
  return m;
}

TrainBuffer sample_mixture(const GaussianMixture& mixture, int n, std::uint64_t seed) {
  mixture.validate();
  require(n >= 1, "corpus size must be at least 1");
  Rng rng(seed);
  std::discrete_distribution<int> pick(mixture.weights.data(), mixture.weights.data() + mixture.weights.size());
  TrainBuffer buf(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int k = pick(rng.engine());
    Field x = mixture.means.row(k).transpose().array() +
              std::sqrt(mixture.variances(k)) * rng.normal_field(mixture.dim());
    buf.add(std::move(x));
  }
  return buf;
}

namespace {

struct Seg {
  double x0, y0, x1, y1;
};

// Unit-box strokes (x right, y down) for the ten digits.
std::vector<Seg> digit_strokes(int d) {
  auto arc = [](double cx, double cy, double rx, double ry, double a0, double a1) {
    std::vector<Seg> s;
    const int n = 10;
    for (int i = 0; i < n; ++i) {
      const double t0 = a0 + (a1 - a0) * i / n, t1 = a0 + (a1 - a0) * (i + 1) / n;
      s.push_back({cx + rx * std::cos(t0), cy + ry * std::sin(t0), cx + rx * std::cos(t1), cy + ry * std::sin(t1)});
    }
    return s;
  };
  const double pi = 3.14159265358979323846;
  std::vector<Seg> s;
  auto add = [&](std::vector<Seg> more) { s.insert(s.end(), more.begin(), more.end()); };
  switch (d) {
    case 0: add(arc(0.5, 0.5, 0.3, 0.42, 0, 2 * pi)); break;
    case 1: s = {{0.35, 0.25, 0.55, 0.08}, {0.55, 0.08, 0.55, 0.92}}; break;
    case 2:
      add(arc(0.5, 0.32, 0.28, 0.24, -pi, 0.25 * pi));
      s.push_back({0.7, 0.5, 0.2, 0.92});
      s.push_back({0.2, 0.92, 0.8, 0.92});
      break;
    case 3:
      add(arc(0.48, 0.3, 0.26, 0.22, -0.9 * pi, 0.5 * pi));
      add(arc(0.48, 0.71, 0.3, 0.21, -0.5 * pi, 0.9 * pi));
      break;
    case 4: s = {{0.65, 0.92, 0.65, 0.08}, {0.65, 0.08, 0.2, 0.65}, {0.2, 0.65, 0.82, 0.65}}; break;
    case 5:
      s = {{0.75, 0.08, 0.28, 0.08}, {0.28, 0.08, 0.25, 0.45}};
      add(arc(0.47, 0.66, 0.28, 0.26, -0.75 * pi, 0.85 * pi));
      break;
    case 6:
      add(arc(0.5, 0.68, 0.26, 0.24, 0, 2 * pi));
      add(arc(0.72, 0.6, 0.48, 0.52, -pi, -0.6 * pi));
      break;
    case 7: s = {{0.2, 0.08, 0.8, 0.08}, {0.8, 0.08, 0.4, 0.92}}; break;
    case 8:
      add(arc(0.5, 0.28, 0.22, 0.2, 0, 2 * pi));
      add(arc(0.5, 0.7, 0.27, 0.22, 0, 2 * pi));
      break;
    default:
      add(arc(0.5, 0.32, 0.26, 0.24, 0, 2 * pi));
      add(arc(0.28, 0.4, 0.48, 0.52, 0.0, 0.4 * pi));
      break;
  }
  return s;
}

double segment_distance(double px, double py, const Seg& g) {
  const double vx = g.x1 - g.x0, vy = g.y1 - g.y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - g.x0) * vx + (py - g.y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (g.x0 + t * vx), dy = py - (g.y0 + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Field digit_glyph(int digit, Rng& rng, int height, int width) {
  require(digit >= 0 && digit <= 9, "digit must be in 0..9");
  const double scale = 0.55 + 0.3 * rng.uniform();
  const double box_h = scale * height, box_w = 0.75 * scale * width;
  const double oy = (height - box_h) * rng.uniform();
  const double ox = (width - box_w) * rng.uniform();
  const double shear = 0.3 * (rng.uniform() - 0.5);
  const double half_width = 0.7 + 0.9 * rng.uniform();
  std::vector<Seg> strokes = digit_strokes(digit);
  for (auto& g : strokes) {
    auto map = [&](double& x, double& y) {
      const double yy = oy + y * box_h;
      x = ox + (x + shear * (0.5 - y)) * box_w;
      y = yy;
    };
    map(g.x0, g.y0);
    map(g.x1, g.y1);
  }
  Field img(static_cast<Index>(height) * width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      double dmin = 1e9;
      for (const auto& g : strokes) dmin = std::min(dmin, segment_distance(c + 0.5, r + 0.5, g));
      img(static_cast<Index>(r) * width + c) = std::clamp(half_width + 0.5 - dmin, 0.0, 1.0);
    }
  return img;
}

TrainBuffer gen_prior_corpus(CorpusKind kind, int n, std::uint64_t seed, const CorpusOptions& opt) {
  require(n >= 1, "corpus size must be at least 1");
  switch (kind) {
    case CorpusKind::GmmDraws: {
      const GaussianMixture m = opt.mixture ? *opt.mixture : balls_mixture(16, 0.05, seed, opt.height, opt.width);
      return sample_mixture(m, n, derive_seed(seed, 0x676d6dULL));
    }
    case CorpusKind::Balls: {
      TrainBuffer buf(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        BallsOptions b;
        b.height = opt.height;
        b.width = opt.width;
        b.budget = 1;
        b.seed = derive_seed(seed, 0x62616c6cULL, static_cast<std::uint64_t>(i));
        buf.add(gen_balls_task(b).content);
      }
      return buf;
    }
    case CorpusKind::DigitsLike: {
      TrainBuffer buf(static_cast<std::size_t>(n));
      Rng rng(derive_seed(seed, 0x646967ULL));
      for (int i = 0; i < n; ++i) buf.add(digit_glyph(static_cast<int>(rng.uniform_index(10)), rng, opt.height, opt.width));
      return buf;
    }
  }
  throw InvalidArgument("unknown corpus kind");
}

}  // namespace atd
