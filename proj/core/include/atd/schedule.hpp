#pragma once

#include <cstdint>
#include <vector>

#include "atd/types.hpp"

namespace atd {

/// Discrete diffusion coefficients. Step index k in [0, T) denotes diffusion
/// time k + 1; the coefficient "before" step 0 is alpha_bar = 1 (clean data).
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  /// Linear beta ramp from beta_start to beta_end over T steps. Sampling noise
  /// is sigma_k = eta * sqrt((1 - ab_{k-1}) / (1 - ab_k)) * sqrt(1 - ab_k / ab_{k-1}).
  static NoiseSchedule linear(int steps = 30, double beta_start = 1e-4, double beta_end = 0.2, double eta = 0.0);

  /// Arbitrary betas in (0, 1).
  static NoiseSchedule from_betas(std::vector<double> betas, double eta = 0.0);

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta(int k) const { return beta_.at(check(k)); }
  double alpha_bar(int k) const { return alpha_bar_.at(check(k)); }
  /// alpha_bar of the step after denoising k, i.e. ab_{k-1}, with ab_{-1} = 1.
  double alpha_bar_prev(int k) const { return check(k) == 0 ? 1.0 : alpha_bar_[static_cast<std::size_t>(k - 1)]; }
  double sigma(int k) const { return sigma_.at(check(k)); }
  double eta() const { return eta_; }

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }
  const std::vector<double>& sigmas() const { return sigma_; }

  /// Stable fingerprint of the coefficients; stored in checkpoints.
  std::uint64_t hash() const;

 private:
  std::size_t check(int k) const;

  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
  double eta_ = 0.0;
};

/// Per-step weight of the noise-space regression loss: min(SNR_k, cap) / SNR_k
/// with SNR_k = ab_k / (1 - ab_k). A cap <= 0 gives weight 1 everywhere.
double dsm_weight(const NoiseSchedule& schedule, int k, double snr_cap);

/// sqrt(ab_k) x0 + sqrt(1 - ab_k) eps.
template <class A>
A forward_noise(const NoiseSchedule& schedule, const A& x0, int k, const A& eps);

/// Denoised estimate (x_t - sqrt(1 - ab_k) eps_hat) / sqrt(ab_k).
template <class A>
A tweedie(const NoiseSchedule& schedule, const A& x_t, const A& eps_hat, int k);

/// One reverse DDIM step from raw coefficients. Throws InvalidArgument when
/// 1 - ab_prev - sigma^2 is negative.
template <class A>
A ddim_update(const A& x_t, const A& eps_hat, double ab, double ab_prev, double sigma, const A& noise);

/// One reverse step at step index k using the schedule's sigma_k. The caller
/// passes zero noise at k == 0.
template <class A>
A ddim_step(const NoiseSchedule& schedule, const A& x_t, const A& eps_hat, int k, const A& noise);

}  // namespace atd
