#pragma once

#include <cstdint>
#include <filesystem>

#include "atd/domain.hpp"
#include "atd/permanent.hpp"
#include "atd/transient.hpp"

namespace atd {

/// P full-grid samples drawn conditionally on the observations, one per row.
struct PosteriorEnsemble {
  FieldBatch samples;
  std::uint64_t seed = 0;
  int step_t = 0;

  Index size() const { return samples.rows(); }
  Field mean() const { return samples.colwise().mean().transpose(); }
};

/// One reverse chain from x_T ~ N(0, I) drawn from Rng(chain_seed). At every
/// step the noise estimate is eps_theta + eps_zeta, with the h-model reading
/// the prior's own Tweedie estimate. Noise is zero at the last step.
Field sample_chain(const ScoreModel& prior, const HModel& h, const ObservationSet& obs, std::uint64_t chain_seed);

/// Seed of chain i under the ensemble root seed.
std::uint64_t chain_seed(std::uint64_t root, int chain);

/// P independent chains; chain i uses chain_seed(seed, i). Throws for P < 2.
PosteriorEnsemble sample_posterior(const ScoreModel& prior, const HModel& h, const ObservationSet& obs, int P,
                                   std::uint64_t seed, int step_t = 0);

/// (x_t - sqrt(1 - ab) (eps_theta + eps_zeta)) / sqrt(ab).
Field corrected_tweedie(const ScoreModel& prior, const HModel& h, const Field& x_t, const ObservationSet& obs, int k);

/// Copies revealed pixels into every sample. Used when building the h-model's
/// training buffer, never inside the sampler.
FieldBatch impose_observations(FieldBatch samples, const ObservationSet& obs);

/// Root-mean-square pixel error between the ensemble mean and `truth`.
double ensemble_mean_l2(const PosteriorEnsemble& ens, const Field& truth);

/// Mean absolute error between samples and observed values over revealed pixels
/// (zero when nothing is revealed).
double observed_pixel_error(const PosteriorEnsemble& ens, const ObservationSet& obs);

/// Raw little-endian float64 array of shape (P, H, W) at `path`, plus a JSON
/// metadata record at `path` + ".json".
void save_ensemble(const std::filesystem::path& path, const PosteriorEnsemble& ens, const GridShape& grid);
PosteriorEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace atd
