#pragma once

// Tiny dense denoiser: two hidden layers with additive time embeddings and an
// x0-space head. The noise prediction is recovered as
//   eps_hat = (x_t - sqrt(ab) * x0_hat) / sqrt(1 - ab),
//   x0_hat  = W3 h2 + b3 + gate[k] * x_t.

#include <span>
#include <vector>

#include "atd/nn.hpp"
#include "atd/schedule.hpp"

namespace atd::detail {

struct DenoiserShape {
  int pixels = 0;
  int hidden = 64;
  int time_dim = 32;
  int steps = 30;
  int w1 = -1, b1 = -1, wt1 = -1, w2 = -1, b2 = -1, wt2 = -1, w3 = -1, b3 = -1, gate = -1;

  static DenoiserShape make(int pixels, int hidden, int time_dim, int steps, nn::Layout& layout) {
    DenoiserShape s{pixels, hidden, time_dim, steps};
    s.w1 = layout.add("w1", pixels, hidden);
    s.b1 = layout.add("b1", 1, hidden);
    s.wt1 = layout.add("wt1", time_dim, hidden);
    s.w2 = layout.add("w2", hidden, hidden);
    s.b2 = layout.add("b2", 1, hidden);
    s.wt2 = layout.add("wt2", time_dim, hidden);
    s.w3 = layout.add("w3", hidden, pixels);
    s.b3 = layout.add("b3", 1, pixels);
    s.gate = layout.add("gate", steps, 1);
    return s;
  }
};

template <class T>
struct DenoiserCache {
  nn::Mat<T> x, emb, a1, h1, a2, h2, eps;
  std::vector<int> ks;
};

template <class T>
nn::Mat<T> time_embeddings(std::span<const int> ks, int dim) {
  nn::Mat<T> e(static_cast<Index>(ks.size()), dim);
  for (std::size_t i = 0; i < ks.size(); ++i) e.row(static_cast<Index>(i)) = nn::time_embedding<T>(ks[i], dim);
  return e;
}

template <class T>
void denoiser_forward(const DenoiserShape& s, const nn::Params<T>& p, const NoiseSchedule& schedule,
                      const nn::Mat<T>& x, std::span<const int> ks, DenoiserCache<T>& c) {
  c.x = x;
  c.ks.assign(ks.begin(), ks.end());
  c.emb = time_embeddings<T>(ks, s.time_dim);
  c.a1 = nn::dense(p, s.w1, s.b1, x);
  c.a1.noalias() += c.emb * p.tensor(s.wt1);
  c.h1 = nn::leaky_relu(c.a1);
  c.a2 = nn::dense(p, s.w2, s.b2, c.h1);
  c.a2.noalias() += c.emb * p.tensor(s.wt2);
  c.h2 = nn::leaky_relu(c.a2);
  nn::Mat<T> x0 = nn::dense(p, s.w3, s.b3, c.h2);
  c.eps.resize(x.rows(), x.cols());
  const auto gate = p.tensor(s.gate);
  for (Index r = 0; r < x.rows(); ++r) {
    const int k = ks[static_cast<std::size_t>(r)];
    const double ab = schedule.alpha_bar(k);
    const T sab = static_cast<T>(std::sqrt(ab));
    const T inv = static_cast<T>(1.0 / std::sqrt(1.0 - ab));
    x0.row(r) += gate(k, 0) * x.row(r);
    c.eps.row(r) = (x.row(r) - sab * x0.row(r)) * inv;
  }
}

/// Accumulates parameter gradients given dL/d eps_hat.
template <class T>
void denoiser_backward(const DenoiserShape& s, const nn::Params<T>& p, const NoiseSchedule& schedule,
                       const DenoiserCache<T>& c, const nn::Mat<T>& d_eps, nn::Params<T>& grad) {
  nn::Mat<T> d_x0(d_eps.rows(), d_eps.cols());
  auto ggate = grad.tensor(s.gate);
  for (Index r = 0; r < d_eps.rows(); ++r) {
    const int k = c.ks[static_cast<std::size_t>(r)];
    const double ab = schedule.alpha_bar(k);
    d_x0.row(r) = d_eps.row(r) * static_cast<T>(-std::sqrt(ab) / std::sqrt(1.0 - ab));
    ggate(k, 0) += d_x0.row(r).dot(c.x.row(r));
  }
  nn::Mat<T> d_h2 = nn::dense_backward(p, s.w3, s.b3, c.h2, d_x0, grad);
  nn::Mat<T> d_a2 = nn::leaky_relu_backward(c.a2, d_h2);
  grad.tensor(s.wt2).noalias() += c.emb.transpose() * d_a2;
  nn::Mat<T> d_h1 = nn::dense_backward(p, s.w2, s.b2, c.h1, d_a2, grad);
  nn::Mat<T> d_a1 = nn::leaky_relu_backward(c.a1, d_h1);
  grad.tensor(s.wt1).noalias() += c.emb.transpose() * d_a1;
  nn::dense_backward(p, s.w1, s.b1, c.x, d_a1, grad, /*want_dx=*/false);
}

}  // namespace atd::detail
