#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atd/datagen.hpp"
#include "atd/domain.hpp"
#include "atd/permanent.hpp"
#include "atd/policy.hpp"
#include "atd/posterior.hpp"
#include "atd/reward.hpp"
#include "atd/transient.hpp"

namespace atd {

enum class Method { EmPtdm, Random, GreedyAdaptive, DiffatdStatic };

const char* to_string(Method m);
Method parse_method(const std::string& s);

struct ScheduleConfig {
  int steps = 30;
  double beta_start = 1e-4;
  double beta_end = 0.2;
  double eta = 0.0;

  NoiseSchedule build() const { return NoiseSchedule::linear(steps, beta_start, beta_end, eta); }
};

struct SchedulerConfig {
  std::string mode = "adaptive";  // adaptive | uniform | none
  int updates = 30;
  double gamma = 1.0;
  int every = 20;

  /// Step indices (within a budget) after which the h-model is retrained.
  std::vector<int> steps(int budget) const;
};

struct PriorConfig {
  std::string backend = "analytic-gmm";  // analytic-gmm | tiny-denoiser
  std::string checkpoint;                // tiny-denoiser weights
  int mixture_components = 16;
  double mixture_variance = 0.05;
  std::uint64_t mixture_seed = 7;
};

struct TaskSourceConfig {
  std::string kind = "balls";  // balls | file | species
  std::string path;            // task file or species CSV
  int height = 32;
  int width = 32;
  int patch = 1;
  int ball_count = 0;   // > 0 fixes the number of balls
  int ball_radius = 0;  // > 0 fixes the radius
  int species_threshold = 1;
  Region region;
};

struct ExperimentConfig {
  std::vector<std::string> methods{"em-ptdm"};
  std::vector<int> budgets{250};
  std::vector<std::uint64_t> seeds{0};
  TaskSourceConfig task;
  PolicyConfig policy;
  int buffer_samples = 0;  // posterior samples per h-update buffer; 0 means P
  SchedulerConfig scheduler;
  HModelConfig h_model;
  HTrainOptions h_train;
  RewardOptions reward;
  ScheduleConfig schedule;
  PriorConfig prior;
  /// Whether the greedy-adaptive baseline samples through the trained h-model
  /// ("em") or from the frozen prior alone ("prior").
  std::string ga_posterior = "prior";
  bool permanent_update = false;
  TrainOptions permanent_train{5, 1e-3, 16, 0};
  int tasks_per_sequence = 2;
  bool dump_ensembles = false;
  bool dump_scores = false;

  void validate() const;
  int buffer_size() const { return buffer_samples > 0 ? buffer_samples : policy.P; }
};

struct ChosenScores {
  double expl = 0.0;
  double likeli = 0.0;
  double reward_sum = 0.0;
  double exploit = 0.0;
  double combined = 0.0;
};

struct RunRecord {
  int t = 0;
  int query = -1;
  double outcome = 0.0;
  double alpha = 0.0;
  std::optional<ChosenScores> scores;  // absent for the random baseline
  double cumulative = 0.0;
  bool h_update = false;
  bool reward_update = false;
  double wall_ms = 0.0;
  std::string status = "ok";  // ok | aborted
  std::string error;
};

/// Optional observers; called synchronously from the step loop.
struct EpisodeSinks {
  std::function<void(const RunRecord&)> on_record;
  std::function<void(int t, const PosteriorEnsemble&)> on_ensemble;
  std::function<void(int t, const ScoreBreakdown&)> on_scores;
};

struct EpisodeResult {
  std::vector<RunRecord> records;
  double success_rate = 0.0;
  bool aborted = false;
  /// Root-mean-square error between the refreshed buffer's mean and the
  /// ground truth, one entry per h-update.
  std::vector<double> update_l2;
  /// Mean absolute sample error on revealed pixels, one entry per h-update.
  std::vector<double> update_observed_error;
  HModel h;
  ObservationSet observations;
  PosteriorEnsemble final_ensemble;  // last scoring ensemble (empty for random)
};

/// Frozen prior named by the config (mixture or checkpoint).
ScoreModel build_prior(const ExperimentConfig& cfg);

/// Runs one method on one task for task.budget steps. Exceptions raised inside
/// the loop end the episode with an aborted record.
EpisodeResult run_episode(const ExperimentConfig& cfg, Method method, const ScoreModel& prior, const SearchTask& task,
                          std::uint64_t seed, const EpisodeSinks& sinks = {});

/// Task for a seed and budget from the configured source.
SearchTask make_config_task(const ExperimentConfig& cfg, std::uint64_t seed, int budget);

struct SuiteCell {
  std::string method;
  int budget = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> success;  // per seed, aligned with `seeds`
  std::vector<std::vector<double>> curves;  // cumulative discovery per seed
  bool complete = true;
  std::vector<std::string> errors;

  double mean() const;
  double sd() const;  // sample standard deviation
};

struct SuiteResult {
  std::vector<SuiteCell> cells;
};

/// methods x budgets x seeds from the config. A failing run is recorded, the
/// cell is marked incomplete, and the suite continues.
SuiteResult run_suite(const ExperimentConfig& cfg, const ScoreModel& prior,
                      const std::function<void(const std::string& method, int budget, std::uint64_t seed,
                                               const EpisodeResult&)>& on_episode = {});

/// "0.5620 ± 0.0073".
std::string format_mean_sd(double mean, double sd, int digits = 4);

struct SequenceResult {
  std::vector<EpisodeResult> episodes;
  std::vector<std::uint64_t> prior_checksums;  // prior used for each task
};

/// Runs tasks in order. With cfg.permanent_update, after each task the final
/// posterior samples fine-tune a copy of the prior used for the next task.
SequenceResult cross_task_loop(const ExperimentConfig& cfg, Method method, const ScoreModel& prior,
                               const std::vector<SearchTask>& tasks, std::uint64_t seed);

/// Posterior buffer drawn at the end of an episode for the permanent update.
TrainBuffer final_posterior_buffer(const ExperimentConfig& cfg, const ScoreModel& prior, const EpisodeResult& ep,
                                   std::uint64_t seed);

/// Writes curves.csv, sr_by_budget.csv and one SVG chart per budget.
void emit_plots(const SuiteResult& results, const std::filesystem::path& out_dir);

}  // namespace atd
