#include <atd/datagen.hpp>
#include <atd/policy.hpp>
#include <atd/posterior.hpp>
#include <atd/reward.hpp>
#include <atd/transient.hpp>

#include <benchmark/benchmark.h>

namespace {

// 32x32 balls task with a handful of revealed pixels.
struct Fixture {
  atd::GridShape grid{32, 32, 1, 1};
  atd::NoiseSchedule schedule = atd::NoiseSchedule::linear(30, 1e-4, 0.2, 0.0);
  atd::ScoreModel prior = atd::ScoreModel::analytic(atd::balls_mixture(16, 0.05, 7), schedule);
  atd::SearchTask task;
  atd::ObservationSet obs;

  Fixture() {
    atd::BallsOptions opt;
    opt.seed = 3;
    opt.budget = 150;
    task = atd::gen_balls_task(opt);
    obs = atd::ObservationSet(task.grid);
    for (int q = 0; q < task.grid.candidates(); q += 97) obs = atd::query(task, obs, q).second;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Non-zero output so the network pass is not skipped.
atd::HModel active_h(const Fixture& f) {
  atd::HModel h = atd::HModel::zero_output(f.grid, f.schedule, 2);
  auto p = h.params();
  p.values().setConstant(0.01f);
  return h.with_params(p);
}

void BM_ScoreCandidates(benchmark::State& state) {
  const Fixture& f = fixture();
  const int P = static_cast<int>(state.range(0));
  const atd::PosteriorEnsemble ens =
      atd::sample_posterior(f.prior, atd::HModel::all_zero(f.grid, f.schedule), f.obs, P, 11);
  const atd::RewardModel reward = atd::RewardModel::create(1, 1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(atd::score_candidates(ens, f.grid, reward, 1.0));
}
BENCHMARK(BM_ScoreCandidates)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_SamplePosterior(benchmark::State& state) {
  const Fixture& f = fixture();
  const bool zero = state.range(0) == 0;
  const atd::HModel h = zero ? atd::HModel::all_zero(f.grid, f.schedule) : active_h(f);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(atd::sample_posterior(f.prior, h, f.obs, 16, ++seed));
  state.SetLabel(zero ? "h skipped" : "h active");
}
BENCHMARK(BM_SamplePosterior)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_HForward(benchmark::State& state) {
  const Fixture& f = fixture();
  const atd::HModel h = active_h(f);
  atd::Rng rng(1);
  atd::FieldBatch x(16, f.grid.height * f.grid.width);
  for (atd::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(h.correct(x, x, f.obs, 10));
}
BENCHMARK(BM_HForward)->Unit(benchmark::kMillisecond);

void BM_DenoiserEps(benchmark::State& state) {
  const Fixture& f = fixture();
  const atd::ScoreModel net = atd::ScoreModel::denoiser(f.grid.height * f.grid.width, f.schedule, 4);
  atd::Rng rng(1);
  atd::FieldBatch x(16, f.grid.height * f.grid.width);
  for (atd::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(net.predict_eps(x, 10));
}
BENCHMARK(BM_DenoiserEps)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
