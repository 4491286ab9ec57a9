#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atd/domain.hpp"
#include "atd/posterior.hpp"
#include "atd/reward.hpp"

namespace atd {

enum class Normalization { None, MinMax };
enum class AlphaMode { LinearRemaining, Amplified };

const char* to_string(Normalization n);
const char* to_string(AlphaMode m);
Normalization parse_normalization(const std::string& s);
AlphaMode parse_alpha_mode(const std::string& s);

struct PolicyConfig {
  double sigma_x = 1.0;
  int P = 16;
  AlphaMode alpha_mode = AlphaMode::LinearRemaining;
  double amplification = 1.0;  // used in Amplified mode
  Normalization normalization = Normalization::MinMax;

  void validate() const;
  double effective_amplification() const { return alpha_mode == AlphaMode::Amplified ? amplification : 1.0; }
};

/// Patch q of every sample, one sample per row.
Eigen::MatrixXd gather_patches(const PosteriorEnsemble& ens, const GridShape& grid, int q);

/// sum_i sum_j sum_pix (x_i - x_j)^2 / (2 sigma^2).
double expl_score(const PosteriorEnsemble& ens, const GridShape& grid, int q, double sigma_x);
/// sum_i sum_j exp(-sum_pix (x_i - x_j)^2 / (2 sigma^2)), accumulated via log-sum-exp.
double likeli_score(const PosteriorEnsemble& ens, const GridShape& grid, int q, double sigma_x);
/// likeli_score * sum_i r(patch_i).
double exploit_score(const PosteriorEnsemble& ens, const GridShape& grid, int q, const RewardModel& r, double sigma_x);

/// Raw score families for every candidate.
struct CandidateScores {
  Eigen::VectorXd expl;
  Eigen::VectorXd likeli;
  Eigen::VectorXd reward_sum;
  Eigen::VectorXd exploit;

  Index size() const { return expl.size(); }
};

/// All candidates at once. Throws NonFiniteScore if any score is not finite.
CandidateScores score_candidates(const PosteriorEnsemble& ens, const GridShape& grid, const RewardModel& r,
                                 double sigma_x);

/// max(0, (aB - t) / (aB + t)), capped at 1. Requires 0 <= t <= B.
double alpha(int t, int budget, double amplification = 1.0);

struct ScoreBreakdown {
  CandidateScores raw;
  double alpha = 1.0;
  Eigen::VectorXd combined;
};

/// alpha * expl + (1 - alpha) * exploit, after optional min-max scaling of each
/// family over the unvisited candidates (visited entries are left unscaled and
/// are never selected).
ScoreBreakdown combined_score(CandidateScores raw, int t, int budget, const PolicyConfig& cfg,
                              const std::vector<bool>& visited);

/// Index of the largest score among unvisited candidates, lowest index on ties.
/// Throws BudgetExhausted when every candidate is visited.
int argmax_unvisited(const Eigen::VectorXd& scores, const std::vector<bool>& visited);
int select_query(const ScoreBreakdown& scores, const std::vector<bool>& visited);

/// Uniform over unvisited candidates.
int baseline_random(const std::vector<bool>& visited, Rng& rng);
int baseline_random(const std::vector<bool>& visited, std::uint64_t seed);

/// argmax of exploit over unvisited candidates.
int baseline_greedy_adaptive(const PosteriorEnsemble& ens, const GridShape& grid, const RewardModel& r,
                             const std::vector<bool>& visited, double sigma_x);

}  // namespace atd
