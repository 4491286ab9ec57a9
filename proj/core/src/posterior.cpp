#include "atd/posterior.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace atd {

using nlohmann::json;

std::uint64_t chain_seed(std::uint64_t root, int chain) {
  return derive_seed(root, 0x636861696eULL, static_cast<std::uint64_t>(chain));
}

Field sample_chain(const ScoreModel& prior, const HModel& h, const ObservationSet& obs, std::uint64_t seed) {
  const NoiseSchedule& schedule = prior.schedule();
  const Index d = prior.pixels();
  require(obs.values().size() == d, "observation grid does not match the prior");
  const bool use_h = !h.output_is_zero();
  Rng rng(seed);
  Field x = rng.normal_field(d);
  for (int k = schedule.steps() - 1; k >= 0; --k) {
    Field eps = prior.predict_eps(x, k);
    if (use_h) {
      const Field x0_hat = tweedie(schedule, x, eps, k);
      eps += h_correct(h, x, x0_hat, obs, k);
    }
    Field noise = Field::Zero(d);
    if (k > 0 && schedule.sigma(k) > 0.0) noise = rng.normal_field(d);
    x = ddim_step(schedule, x, eps, k, noise);
  }
  return x;
}

PosteriorEnsemble sample_posterior(const ScoreModel& prior, const HModel& h, const ObservationSet& obs, int P,
                                   std::uint64_t seed, int step_t) {
  require(P >= 2, "posterior ensemble needs at least two samples");
  PosteriorEnsemble ens;
  ens.seed = seed;
  ens.step_t = step_t;
  ens.samples.resize(P, prior.pixels());
  for (int i = 0; i < P; ++i) ens.samples.row(i) = sample_chain(prior, h, obs, chain_seed(seed, i)).transpose();
  return ens;
}

Field corrected_tweedie(const ScoreModel& prior, const HModel& h, const Field& x_t, const ObservationSet& obs, int k) {
  const NoiseSchedule& schedule = prior.schedule();
  const Field eps_theta = prior.predict_eps(x_t, k);
  const Field x0_hat = tweedie(schedule, x_t, eps_theta, k);
  const Field eps_zeta = h_correct(h, x_t, x0_hat, obs, k);
  const double ab = schedule.alpha_bar(k);
  return (x_t - std::sqrt(1.0 - ab) * (eps_theta + eps_zeta)) / std::sqrt(ab);
}

FieldBatch impose_observations(FieldBatch samples, const ObservationSet& obs) {
  require(samples.cols() == obs.values().size(), "sample width does not match the observation grid");
  for (Index i = 0; i < samples.rows(); ++i)
    samples.row(i) = (obs.mask() > 0.5).select(obs.values(), samples.row(i).transpose()).transpose();
  return samples;
}

double ensemble_mean_l2(const PosteriorEnsemble& ens, const Field& truth) {
  require(ens.size() > 0 && ens.samples.cols() == truth.size(), "ensemble_mean_l2: shape mismatch");
  return std::sqrt((ens.mean() - truth).square().mean());
}

double observed_pixel_error(const PosteriorEnsemble& ens, const ObservationSet& obs) {
  const double revealed = obs.mask().sum();
  if (revealed == 0.0) return 0.0;
  double total = 0.0;
  for (Index i = 0; i < ens.size(); ++i)
    total += ((ens.samples.row(i).transpose() - obs.values()).abs() * obs.mask()).sum();
  return total / (revealed * static_cast<double>(ens.size()));
}

void save_ensemble(const std::filesystem::path& path, const PosteriorEnsemble& ens, const GridShape& grid) {
  require(ens.samples.cols() == grid.pixels(), "save_ensemble: grid does not match samples");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(ens.samples.data()),
            static_cast<std::streamsize>(ens.samples.size() * sizeof(double)));
  json meta{{"schema", "atd.ensemble/1"},
            {"dtype", "float64-le"},
            {"shape", {ens.size(), grid.height, grid.width}},
            {"seed", ens.seed},
            {"step_t", ens.step_t}};
  std::ofstream m(path.string() + ".json");
  if (!m) throw Error("cannot write " + path.string() + ".json");
  m << meta.dump(2) << '\n';
}

PosteriorEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream m(path.string() + ".json");
  if (!m) throw Error("cannot read " + path.string() + ".json");
  const json meta = json::parse(m);
  require(meta.at("schema") == "atd.ensemble/1", "unknown ensemble schema");
  const auto shape = meta.at("shape").get<std::vector<Index>>();
  require(shape.size() == 3, "ensemble shape must be (P, H, W)");
  PosteriorEnsemble ens;
  ens.seed = meta.at("seed").get<std::uint64_t>();
  ens.step_t = meta.at("step_t").get<int>();
  ens.samples.resize(shape[0], shape[1] * shape[2]);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  in.read(reinterpret_cast<char*>(ens.samples.data()),
          static_cast<std::streamsize>(ens.samples.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(ens.samples.size() * sizeof(double)))
    throw Error("truncated ensemble file " + path.string());
  return ens;
}

}  // namespace atd
