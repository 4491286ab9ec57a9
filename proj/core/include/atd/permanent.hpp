#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "atd/checkpoint.hpp"
#include "atd/detail/denoiser_net.hpp"
#include "atd/schedule.hpp"

namespace atd {

/// Isotropic Gaussian mixture over flattened grids: sum_k w_k N(mean_k, var_k I).
struct GaussianMixture {
  Eigen::MatrixXd means;     // components x pixels
  Eigen::VectorXd weights;   // sums to 1
  Eigen::VectorXd variances; // > 0

  Index components() const { return means.rows(); }
  Index dim() const { return means.cols(); }
  void validate() const;

  /// log density of the mixture diffused to step k:
  /// sum_k w_k N(sqrt(ab) mean_k, (ab var_k + 1 - ab) I).
  double diffused_log_density(const Field& x, double alpha_bar) const;
};

/// Samples kept for (re)training a score model; every sample shares one grid size.
class TrainBuffer {
 public:
  TrainBuffer() = default;
  explicit TrainBuffer(std::size_t capacity) : capacity_(capacity) {}

  /// Appends a sample; once full, the oldest sample is dropped.
  void add(Field sample);
  void add_batch(const FieldBatch& batch);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t capacity() const { return capacity_; }
  Index pixels() const { return samples_.empty() ? 0 : samples_.front().size(); }
  const Field& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Field>& samples() const { return samples_; }
  FieldBatch as_batch() const;

 private:
  std::vector<Field> samples_;
  std::size_t capacity_ = 1u << 20;
};

enum class ScoreBackend { AnalyticGmm, TinyDenoiser };

const char* to_string(ScoreBackend backend);

struct DenoiserConfig {
  int hidden = 64;
  int time_dim = 32;
};

/// Frozen prior noise predictor. Value type: copies are independent, and no
/// operation in this library mutates a ScoreModel in place.
class ScoreModel {
 public:
  static ScoreModel analytic(GaussianMixture mixture, NoiseSchedule schedule);
  /// Randomly initialised tiny denoiser for grids of `pixels` cells.
  static ScoreModel denoiser(int pixels, NoiseSchedule schedule, std::uint64_t seed, DenoiserConfig cfg = {});

  ScoreBackend backend() const { return backend_; }
  bool trainable() const { return backend_ == ScoreBackend::TinyDenoiser; }
  const NoiseSchedule& schedule() const { return schedule_; }
  Index pixels() const;

  /// Noise prediction for each row of x_t at step k.
  FieldBatch predict_eps(const FieldBatch& x_t, int k) const;
  /// Noise prediction with a per-row step index.
  FieldBatch predict_eps(const FieldBatch& x_t, std::span<const int> ks) const;
  Field predict_eps(const Field& x_t, int k) const;

  /// Bitwise fingerprint of the parameters.
  std::uint64_t checksum() const;

  const GaussianMixture& mixture() const;
  const nn::Params<float>& denoiser_params() const;
  const detail::DenoiserShape& denoiser_shape() const;
  /// Copy of this denoiser carrying `params` (same layout required).
  ScoreModel with_params(nn::Params<float> params) const;

  Checkpoint to_checkpoint() const;
  /// Restores a model. The checkpoint's schedule hash must match `schedule`.
  static ScoreModel from_checkpoint(const Checkpoint& ckpt, NoiseSchedule schedule);

 private:
  ScoreBackend backend_ = ScoreBackend::AnalyticGmm;
  NoiseSchedule schedule_;
  std::shared_ptr<const GaussianMixture> mixture_;
  detail::DenoiserShape shape_;
  nn::Params<float> params_;
};

struct TrainOptions {
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double snr_cap = 5.0;  // see dsm_weight; 0 disables the weighting
};

struct TrainResult {
  ScoreModel model;
  std::vector<double> epoch_loss;  // mean DSM loss per epoch
};

/// DSM on the buffer: minimise w_k ||eps_hat(sqrt(ab) x0 + sqrt(1-ab) eps, k) - eps||^2
/// with k uniform over the schedule and w_k = dsm_weight(k, opt.snr_cap). Starts from a fresh randomly initialised denoiser.
TrainResult pretrain_denoiser(const TrainBuffer& buffer, const NoiseSchedule& schedule, const TrainOptions& opt,
                              DenoiserConfig cfg = {});

/// Fine-tunes a copy of `model` on posterior samples; `model` itself is untouched.
/// Throws InvalidArgument for the analytic backend or an empty buffer.
TrainResult update_permanent(const ScoreModel& model, const TrainBuffer& buffer, const TrainOptions& opt);

}  // namespace atd
