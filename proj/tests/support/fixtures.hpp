#pragma once

#include <atd/datagen.hpp>
#include <atd/harness.hpp>
#include <atd/permanent.hpp>

namespace fixture {

inline atd::GaussianMixture standard_normal(int dim) {
  atd::GaussianMixture m;
  m.means = Eigen::MatrixXd::Zero(1, dim);
  m.weights = Eigen::VectorXd::Ones(1);
  m.variances = Eigen::VectorXd::Ones(1);
  return m;
}

inline atd::GaussianMixture random_mixture(int k, int dim, std::uint64_t seed, double var = 0.05) {
  atd::Rng rng(seed);
  atd::GaussianMixture m;
  m.means.resize(k, dim);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < dim; ++j) m.means(i, j) = rng.uniform() < 0.3 ? 1.0 : 0.0;
  m.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  m.variances = Eigen::VectorXd::Constant(k, var);
  return m;
}

/// 8x8 balls-like setting small enough for unit tests.
inline atd::ExperimentConfig tiny_config() {
  atd::ExperimentConfig cfg;
  cfg.task.height = 8;
  cfg.task.width = 8;
  cfg.task.ball_count = 2;
  cfg.task.ball_radius = 1;
  cfg.policy.P = 4;
  cfg.scheduler.updates = 3;
  cfg.h_model = {8, 8, 8};
  cfg.h_train.epochs = 3;
  cfg.schedule.steps = 10;
  return cfg;
}

inline atd::SearchTask tiny_task(std::uint64_t seed, int budget = 12) {
  atd::BallsOptions opt;
  opt.height = 8;
  opt.width = 8;
  opt.count = 2;
  opt.radius = 1;
  opt.budget = budget;
  opt.seed = seed;
  return atd::gen_balls_task(opt);
}

inline atd::ScoreModel tiny_prior(const atd::ExperimentConfig& cfg, std::uint64_t seed = 5) {
  return atd::ScoreModel::analytic(random_mixture(6, cfg.task.height * cfg.task.width, seed), cfg.schedule.build());
}

}  // namespace fixture
