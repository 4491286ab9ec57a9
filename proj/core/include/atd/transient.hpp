#pragma once

#include <cstdint>
#include <vector>

#include "atd/checkpoint.hpp"
#include "atd/detail/h_net.hpp"
#include "atd/domain.hpp"
#include "atd/permanent.hpp"

namespace atd {

struct HModelConfig {
  int width1 = 32;
  int width2 = 64;
  int time_dim = 32;
};

/// Transient memory: a learned correction added to the frozen prior's noise
/// prediction. Conditioning enters through the observed values (zero where
/// unrevealed) and the reveal mask.
class HModel {
 public:
  HModel() = default;

  /// Hidden layers randomly initialised, output layer exactly zero: the
  /// correction is identically zero until the first training step.
  static HModel zero_output(const GridShape& grid, NoiseSchedule schedule, std::uint64_t seed, HModelConfig cfg = {});
  /// Every parameter zero.
  static HModel all_zero(const GridShape& grid, NoiseSchedule schedule, HModelConfig cfg = {});

  const detail::HShape& shape() const { return shape_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const nn::Params<float>& params() const { return params_; }
  HModel with_params(nn::Params<float> params) const;

  /// True when the output layer is all zeros, so correct() returns zeros.
  bool output_is_zero() const;

  /// Noise-space correction eps_zeta for each row of x_t.
  FieldBatch correct(const FieldBatch& x_t, const FieldBatch& x0_hat, const ObservationSet& obs, int k) const;

  std::uint64_t checksum() const { return nn::checksum(params_); }

  Checkpoint to_checkpoint() const;
  static HModel from_checkpoint(const Checkpoint& ckpt, NoiseSchedule schedule);

 private:
  detail::HShape shape_;
  NoiseSchedule schedule_;
  nn::Params<float> params_;
};

/// Single-grid convenience wrapper around HModel::correct.
Field h_correct(const HModel& h, const Field& x_t, const Field& x0_hat, const ObservationSet& obs, int k);

/// One DSM draw per clean sample: step index and Gaussian noise.
struct DsmBatch {
  FieldBatch x0;
  std::vector<int> ks;
  FieldBatch eps;

  Index size() const { return x0.rows(); }
};

DsmBatch make_dsm_batch(const FieldBatch& x0, int steps, Rng& rng);

/// mean_i w_i || h(H_i, x0_hat_i, y) + eps_theta(H_i, k_i) - eps_i ||^2 with
/// H_i = forward_noise(x0_i, k_i, eps_i), x0_hat_i the prior's Tweedie estimate
/// and w_i = dsm_weight(k_i, snr_cap). The prior is only evaluated forward.
double dsm_loss(const HModel& h, const ScoreModel& prior, const DsmBatch& batch, const ObservationSet& obs,
                double snr_cap = 0.0);

/// Loss and gradient with respect to the h parameters, in the scalar type of
/// `params` (used by gradient checks in double precision).
template <class T>
T dsm_loss_and_grad(const detail::HShape& shape, const nn::Params<T>& params, const ScoreModel& prior,
                    const DsmBatch& batch, const ObservationSet& obs, nn::Params<T>* grad, double snr_cap = 0.0);

struct HTrainOptions {
  int epochs = 20;
  double lr = 1e-3;
  int batch_size = 0;  // 0: whole buffer per step
  std::uint64_t seed = 0;
  double snr_cap = 0.0;  // plain DSM; see dsm_weight
};

struct HTrainResult {
  HModel model;
  std::vector<double> epoch_loss;
};

/// Fits the correction on buffer samples (Adam on the DSM objective); returns
/// the updated model. Throws InvalidArgument on an empty buffer.
HTrainResult train_h(const HModel& h, const ScoreModel& prior, const TrainBuffer& buffer, const ObservationSet& obs,
                     const HTrainOptions& opt);

/// Interval before update i: (B / U) * (1 - i / (U + 1))^gamma.
double update_interval(int budget, int updates, double gamma, int i);

/// Step indices at which the transient memory is retrained: rounded cumulative
/// sums of update_interval(i) for i = 0..U-1, clamped to B-1, deduplicated.
std::vector<int> schedule_updates(int budget, int updates, double gamma);

/// Every `every` steps: every, 2*every, ... < budget.
std::vector<int> uniform_updates(int budget, int every);

}  // namespace atd
