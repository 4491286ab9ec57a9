#include "atd/policy.hpp"

#include <cmath>
#include <limits>

namespace atd {

const char* to_string(Normalization n) { return n == Normalization::None ? "none" : "minmax"; }
const char* to_string(AlphaMode m) { return m == AlphaMode::LinearRemaining ? "linear-remaining" : "amplified"; }

Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::None;
  if (s == "minmax") return Normalization::MinMax;
  throw InvalidArgument("unknown normalization '" + s + "'");
}

AlphaMode parse_alpha_mode(const std::string& s) {
  if (s == "linear-remaining") return AlphaMode::LinearRemaining;
  if (s == "amplified") return AlphaMode::Amplified;
  throw InvalidArgument("unknown alpha mode '" + s + "'");
}

void PolicyConfig::validate() const {
  require(sigma_x > 0.0, "sigma_x must be positive");
  require(P >= 2, "P must be at least 2");
  require(amplification >= 1.0, "amplification must be at least 1");
}

Eigen::MatrixXd gather_patches(const PosteriorEnsemble& ens, const GridShape& grid, int q) {
  require(q >= 0 && q < grid.candidates(), "candidate index out of range");
  require(ens.samples.cols() == grid.pixels(), "ensemble does not match the grid");
  const auto pix = grid.patch_pixels(q);
  Eigen::MatrixXd out(ens.size(), static_cast<Index>(pix.size()));
  for (Index i = 0; i < ens.size(); ++i)
    for (std::size_t j = 0; j < pix.size(); ++j) out(i, static_cast<Index>(j)) = ens.samples(i, pix[j]);
  return out;
}

namespace {

// sum_i sum_j ||x_i - x_j||^2 = 2 n sum_i ||x_i - mean||^2
double expl_from_patches(const Eigen::MatrixXd& x, double sigma_x) {
  const double n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double spread = (x.rowwise() - mean).squaredNorm();
  return n * spread / (sigma_x * sigma_x);
}

double likeli_from_patches(const Eigen::MatrixXd& x, double sigma_x) {
  const Index n = x.rows();
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  const Eigen::MatrixXd gram = x * x.transpose();
  Eigen::MatrixXd logits(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double d2 = i == j ? 0.0 : std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      logits(i, j) = -d2 / (2.0 * sigma_x * sigma_x);
    }
  const double m = logits.maxCoeff();
  return std::exp(m) * (logits.array() - m).exp().sum();
}

}  // namespace

double expl_score(const PosteriorEnsemble& ens, const GridShape& grid, int q, double sigma_x) {
  require(sigma_x > 0.0, "sigma_x must be positive");
  return expl_from_patches(gather_patches(ens, grid, q), sigma_x);
}

double likeli_score(const PosteriorEnsemble& ens, const GridShape& grid, int q, double sigma_x) {
  require(sigma_x > 0.0, "sigma_x must be positive");
  return likeli_from_patches(gather_patches(ens, grid, q), sigma_x);
}

double exploit_score(const PosteriorEnsemble& ens, const GridShape& grid, int q, const RewardModel& r,
                     double sigma_x) {
  const Eigen::MatrixXd x = gather_patches(ens, grid, q);
  return likeli_from_patches(x, sigma_x) * r.predict_batch(x).sum();
}

CandidateScores score_candidates(const PosteriorEnsemble& ens, const GridShape& grid, const RewardModel& r,
                                 double sigma_x) {
  require(sigma_x > 0.0, "sigma_x must be positive");
  require(r.patch_area() == grid.patch_area(), "reward model patch size differs from the grid");
  const int n = grid.candidates();
  const Index p = ens.size();
  CandidateScores s;
  s.expl.resize(n);
  s.likeli.resize(n);
  s.reward_sum.resize(n);
  s.exploit.resize(n);
  Eigen::MatrixXd all_patches(static_cast<Index>(n) * p, grid.patch_area());
  for (int q = 0; q < n; ++q) {
    const Eigen::MatrixXd x = gather_patches(ens, grid, q);
    s.expl(q) = expl_from_patches(x, sigma_x);
    s.likeli(q) = likeli_from_patches(x, sigma_x);
    all_patches.middleRows(static_cast<Index>(q) * p, p) = x;
  }
  const Eigen::VectorXd rewards = r.predict_batch(all_patches);
  for (int q = 0; q < n; ++q) s.reward_sum(q) = rewards.segment(static_cast<Index>(q) * p, p).sum();
  s.exploit = s.likeli.cwiseProduct(s.reward_sum);
  if (!s.expl.allFinite() || !s.likeli.allFinite() || !s.exploit.allFinite())
    throw NonFiniteScore("non-finite candidate score");
  return s;
}

double alpha(int t, int budget, double amplification) {
  require(budget >= 1 && t >= 0 && t <= budget, "alpha: step outside [0, B]");
  require(amplification >= 1.0, "alpha: amplification must be at least 1");
  const double b = amplification * budget;
  return std::clamp((b - t) / (b + t), 0.0, 1.0);
}

namespace {

Eigen::VectorXd minmax(const Eigen::VectorXd& v, const std::vector<bool>& visited) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Index i = 0; i < v.size(); ++i) {
    if (visited[static_cast<std::size_t>(i)]) continue;
    lo = std::min(lo, v(i));
    hi = std::max(hi, v(i));
  }
  if (!(hi > lo)) return Eigen::VectorXd::Zero(v.size());
  return (v.array() - lo) / (hi - lo);
}

}  // namespace

ScoreBreakdown combined_score(CandidateScores raw, int t, int budget, const PolicyConfig& cfg,
                              const std::vector<bool>& visited) {
  require(static_cast<Index>(visited.size()) == raw.size(), "visited set does not match the candidates");
  ScoreBreakdown out;
  out.alpha = alpha(t, budget, cfg.effective_amplification());
  Eigen::VectorXd e = raw.expl;
  Eigen::VectorXd x = raw.exploit;
  if (cfg.normalization == Normalization::MinMax) {
    e = minmax(e, visited);
    x = minmax(x, visited);
  }
  out.combined = out.alpha * e + (1.0 - out.alpha) * x;
  if (!out.combined.allFinite()) throw NonFiniteScore("non-finite combined score");
  out.raw = std::move(raw);
  return out;
}

int argmax_unvisited(const Eigen::VectorXd& scores, const std::vector<bool>& visited) {
  require(static_cast<Index>(visited.size()) == scores.size(), "visited set does not match the candidates");
  int best = -1;
  for (Index i = 0; i < scores.size(); ++i) {
    if (visited[static_cast<std::size_t>(i)]) continue;
    if (best < 0 || scores(i) > scores(best)) best = static_cast<int>(i);
  }
  if (best < 0) throw BudgetExhausted("every candidate has been visited");
  return best;
}

int select_query(const ScoreBreakdown& scores, const std::vector<bool>& visited) {
  return argmax_unvisited(scores.combined, visited);
}

int baseline_random(const std::vector<bool>& visited, Rng& rng) {
  std::vector<int> open;
  for (std::size_t i = 0; i < visited.size(); ++i)
    if (!visited[i]) open.push_back(static_cast<int>(i));
  if (open.empty()) throw BudgetExhausted("every candidate has been visited");
  return open[static_cast<std::size_t>(rng.uniform_index(static_cast<Index>(open.size())))];
}

int baseline_random(const std::vector<bool>& visited, std::uint64_t seed) {
  Rng rng(seed);
  return baseline_random(visited, rng);
}

int baseline_greedy_adaptive(const PosteriorEnsemble& ens, const GridShape& grid, const RewardModel& r,
                             const std::vector<bool>& visited, double sigma_x) {
  return argmax_unvisited(score_candidates(ens, grid, r, sigma_x).exploit, visited);
}

}  // namespace atd
