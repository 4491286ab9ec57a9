#pragma once

// Lightweight correction network. Per pixel it reads the 3x3 neighbourhood of
// four channels (noisy state, Tweedie estimate, observed values, reveal mask),
// adds a time-embedding bias, and passes through two leaky-ReLU layers of
// widths [c1, c2] to a scalar x0-space correction c. The noise-space output is
//   eps_zeta = -sqrt(ab) / sqrt(1 - ab) * c,
// so the corrected Tweedie estimate is exactly x0_hat + c.

#include <span>
#include <vector>

#include "atd/nn.hpp"
#include "atd/schedule.hpp"

namespace atd::detail {

inline constexpr int kHInputChannels = 4;

struct HShape {
  int height = 0;
  int width = 0;
  int c1 = 32;
  int c2 = 64;
  int time_dim = 32;
  int w1 = -1, b1 = -1, wt = -1, w2 = -1, b2 = -1, w3 = -1, b3 = -1;

  Index pixels() const { return static_cast<Index>(height) * width; }

  static HShape make(int height, int width, int c1, int c2, int time_dim, nn::Layout& layout) {
    HShape s{height, width, c1, c2, time_dim};
    s.w1 = layout.add("w1", kHInputChannels * 9, c1);
    s.b1 = layout.add("b1", 1, c1);
    s.wt = layout.add("wt", time_dim, c1);
    s.w2 = layout.add("w2", c1, c2);
    s.b2 = layout.add("b2", 1, c2);
    s.w3 = layout.add("w3", c2, 1);
    s.b3 = layout.add("b3", 1, 1);
    return s;
  }
};

template <class T>
struct HCache {
  nn::Mat<T> features, a1, h1, a2, h2;
  nn::Mat<T> emb;  // samples x time_dim
  std::vector<int> ks;
};

inline double h_output_scale(const NoiseSchedule& schedule, int k) {
  const double ab = schedule.alpha_bar(k);
  return -std::sqrt(ab) / std::sqrt(1.0 - ab);
}

/// Rows of x_t / x0_hat are samples; obs_values / obs_mask are shared.
/// Returns eps_zeta with one row per sample.
template <class T>
nn::Mat<T> h_forward(const HShape& s, const nn::Params<T>& p, const NoiseSchedule& schedule,
                     const nn::Mat<T>& x_t, const nn::Mat<T>& x0_hat, const nn::RowVec<T>& obs_values,
                     const nn::RowVec<T>& obs_mask, std::span<const int> ks, HCache<T>& c) {
  const Index n = x_t.rows();
  const Index d = s.pixels();
  c.ks.assign(ks.begin(), ks.end());
  c.features.resize(n * d, kHInputChannels * 9);
  for (Index i = 0; i < n; ++i) {
    std::vector<const T*> channels{x_t.row(i).data(), x0_hat.row(i).data(), obs_values.data(), obs_mask.data()};
    nn::im2col3x3<T>(channels, s.height, s.width, c.features.middleRows(i * d, d));
  }
  c.emb.resize(n, s.time_dim);
  for (Index i = 0; i < n; ++i) c.emb.row(i) = nn::time_embedding<T>(ks[static_cast<std::size_t>(i)], s.time_dim);
  nn::Mat<T> bias = c.emb * p.tensor(s.wt);

  c.a1 = nn::dense(p, s.w1, s.b1, c.features);
  for (Index i = 0; i < n; ++i) c.a1.middleRows(i * d, d).rowwise() += bias.row(i);
  c.h1 = nn::leaky_relu(c.a1);
  c.a2 = nn::dense(p, s.w2, s.b2, c.h1);
  c.h2 = nn::leaky_relu(c.a2);
  nn::Mat<T> corr = nn::dense(p, s.w3, s.b3, c.h2);

  nn::Mat<T> out(n, d);
  for (Index i = 0; i < n; ++i) {
    const T scale = static_cast<T>(h_output_scale(schedule, ks[static_cast<std::size_t>(i)]));
    out.row(i) = scale * corr.middleRows(i * d, d).transpose();
  }
  return out;
}

/// Accumulates parameter gradients given dL/d eps_zeta (samples x pixels).
template <class T>
void h_backward(const HShape& s, const nn::Params<T>& p, const NoiseSchedule& schedule, const HCache<T>& c,
                const nn::Mat<T>& d_out, nn::Params<T>& grad) {
  const Index n = d_out.rows();
  const Index d = s.pixels();
  nn::Mat<T> d_corr(n * d, 1);
  for (Index i = 0; i < n; ++i) {
    const T scale = static_cast<T>(h_output_scale(schedule, c.ks[static_cast<std::size_t>(i)]));
    d_corr.middleRows(i * d, d) = scale * d_out.row(i).transpose();
  }
  nn::Mat<T> d_h2 = nn::dense_backward(p, s.w3, s.b3, c.h2, d_corr, grad);
  nn::Mat<T> d_a2 = nn::leaky_relu_backward(c.a2, d_h2);
  nn::Mat<T> d_h1 = nn::dense_backward(p, s.w2, s.b2, c.h1, d_a2, grad);
  nn::Mat<T> d_a1 = nn::leaky_relu_backward(c.a1, d_h1);
  nn::dense_backward(p, s.w1, s.b1, c.features, d_a1, grad, /*want_dx=*/false);
  auto gwt = grad.tensor(s.wt);
  for (Index i = 0; i < n; ++i) {
    nn::RowVec<T> col_sum = d_a1.middleRows(i * d, d).colwise().sum();
    gwt.noalias() += c.emb.row(i).transpose() * col_sum;
  }
}

}  // namespace atd::detail
