#include "atd/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace atd {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end, double eta) {
  require(steps >= 1, "schedule needs at least one step");
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
    betas[static_cast<std::size_t>(k)] = beta_start + frac * (beta_end - beta_start);
  }
  return from_betas(std::move(betas), eta);
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas, double eta) {
  require(!betas.empty(), "schedule needs at least one step");
  require(eta >= 0.0, "eta must be non-negative");
  NoiseSchedule s;
  s.eta_ = eta;
  double running = 1.0;
  for (double b : betas) {
    require(b > 0.0 && b < 1.0, "beta values must lie in (0, 1)");
    running *= (1.0 - b);
    s.alpha_bar_.push_back(running);
  }
  s.beta_ = std::move(betas);
  for (std::size_t k = 0; k < s.beta_.size(); ++k) {
    const double ab = s.alpha_bar_[k];
    const double ab_prev = k == 0 ? 1.0 : s.alpha_bar_[k - 1];
    s.sigma_.push_back(eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev));
  }
  return s;
}

std::size_t NoiseSchedule::check(int k) const {
  if (k < 0 || k >= steps())
    throw InvalidArgument("diffusion step " + std::to_string(k) + " out of range [0, " + std::to_string(steps()) +
                          ")");
  return static_cast<std::size_t>(k);
}

double dsm_weight(const NoiseSchedule& schedule, int k, double snr_cap) {
  const double ab = schedule.alpha_bar(k);
  if (snr_cap <= 0.0) return 1.0;
  const double snr = ab / (1.0 - ab);
  return std::min(snr, snr_cap) / snr;
}

std::uint64_t NoiseSchedule::hash() const {
  // FNV-1a over the raw coefficient bytes.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::vector<double>& values) {
    for (double v : values) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
      }
    }
  };
  mix(beta_);
  mix(sigma_);
  return h;
}

template <class A>
A forward_noise(const NoiseSchedule& schedule, const A& x0, int k, const A& eps) {
  require(x0.rows() == eps.rows() && x0.cols() == eps.cols(), "forward_noise: shape mismatch");
  const double ab = schedule.alpha_bar(k);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

template <class A>
A tweedie(const NoiseSchedule& schedule, const A& x_t, const A& eps_hat, int k) {
  require(x_t.rows() == eps_hat.rows() && x_t.cols() == eps_hat.cols(), "tweedie: shape mismatch");
  const double ab = schedule.alpha_bar(k);
  return (x_t - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

template <class A>
A ddim_update(const A& x_t, const A& eps_hat, double ab, double ab_prev, double sigma, const A& noise) {
  require(x_t.rows() == eps_hat.rows() && x_t.cols() == eps_hat.cols(), "ddim_update: shape mismatch");
  double radicand = 1.0 - ab_prev - sigma * sigma;
  if (radicand < 0.0) {
    if (radicand > -1e-12) {
      radicand = 0.0;
    } else {
      throw InvalidArgument("ddim_update: negative radicand 1 - ab_prev - sigma^2 = " + std::to_string(radicand));
    }
  }
  A x0_hat = (x_t - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
  A out = std::sqrt(ab_prev) * x0_hat + std::sqrt(radicand) * eps_hat;
  if (sigma != 0.0) {
    require(noise.rows() == x_t.rows() && noise.cols() == x_t.cols(), "ddim_update: noise shape mismatch");
    out += sigma * noise;
  }
  return out;
}

template <class A>
A ddim_step(const NoiseSchedule& schedule, const A& x_t, const A& eps_hat, int k, const A& noise) {
  return ddim_update(x_t, eps_hat, schedule.alpha_bar(k), schedule.alpha_bar_prev(k), schedule.sigma(k), noise);
}

#define ATD_INSTANTIATE_SCHEDULE_OPS(A)                                                          \
  template A forward_noise<A>(const NoiseSchedule&, const A&, int, const A&);                    \
  template A tweedie<A>(const NoiseSchedule&, const A&, const A&, int);                          \
  template A ddim_update<A>(const A&, const A&, double, double, double, const A&);               \
  template A ddim_step<A>(const NoiseSchedule&, const A&, const A&, int, const A&);

ATD_INSTANTIATE_SCHEDULE_OPS(Field)
ATD_INSTANTIATE_SCHEDULE_OPS(FieldBatch)

#undef ATD_INSTANTIATE_SCHEDULE_OPS

}  // namespace atd
