#pragma once

// Minimal reverse-mode building blocks for the tiny networks in this library.
// Every model stores its parameters in one flat vector; a Layout names the
// tensors inside it so optimisers, checksums and checkpoints see one buffer.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "atd/rng.hpp"
#include "atd/types.hpp"

namespace atd::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct Slot {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;
  Index size() const { return rows * cols; }
};

class Layout {
 public:
  int add(std::string name, Index rows, Index cols) {
    slots_.push_back(Slot{std::move(name), rows, cols, size_});
    size_ += rows * cols;
    return static_cast<int>(slots_.size()) - 1;
  }
  const std::vector<Slot>& slots() const { return slots_; }
  const Slot& slot(int id) const { return slots_.at(static_cast<std::size_t>(id)); }
  Index size() const { return size_; }

  friend bool operator==(const Layout& a, const Layout& b) {
    if (a.slots_.size() != b.slots_.size()) return false;
    for (std::size_t i = 0; i < a.slots_.size(); ++i) {
      const auto &x = a.slots_[i], &y = b.slots_[i];
      if (x.name != y.name || x.rows != y.rows || x.cols != y.cols) return false;
    }
    return true;
  }

 private:
  std::vector<Slot> slots_;
  Index size_ = 0;
};

template <class T>
class Params {
 public:
  Params() = default;
  explicit Params(Layout layout) : layout_(std::move(layout)), values_(Vec<T>::Zero(layout_.size())) {}

  const Layout& layout() const { return layout_; }
  Vec<T>& values() { return values_; }
  const Vec<T>& values() const { return values_; }

  Eigen::Map<Mat<T>> tensor(int id) {
    const Slot& s = layout_.slot(id);
    return Eigen::Map<Mat<T>>(values_.data() + s.offset, s.rows, s.cols);
  }
  Eigen::Map<const Mat<T>> tensor(int id) const {
    const Slot& s = layout_.slot(id);
    return Eigen::Map<const Mat<T>>(values_.data() + s.offset, s.rows, s.cols);
  }

  Params zeros_like() const { return Params(layout_); }

  template <class U>
  Params<U> cast() const {
    Params<U> out(layout_);
    out.values() = values_.template cast<U>();
    return out;
  }

  /// Uniform(-bound, bound) with bound = sqrt(6 / fan_in) (He-uniform).
  void init_he(int id, Index fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    auto t = tensor(id);
    for (Index r = 0; r < t.rows(); ++r)
      for (Index c = 0; c < t.cols(); ++c) t(r, c) = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  }

  bool tensor_is_zero(int id) const { return (tensor(id).array() == T(0)).all(); }

 private:
  Layout layout_;
  Vec<T> values_;
};

/// FNV-1a over the raw bytes of the parameter vector.
template <class T>
std::uint64_t checksum(const Params<T>& p) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(p.values().data());
  const std::size_t n = static_cast<std::size_t>(p.values().size()) * sizeof(T);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr double kLeakySlope = 0.01;

template <class T>
Mat<T> leaky_relu(const Mat<T>& pre) {
  return pre.array().max(T(kLeakySlope) * pre.array()).matrix();
}

/// dy * leaky'(pre).
template <class T>
Mat<T> leaky_relu_backward(const Mat<T>& pre, const Mat<T>& dy) {
  return (pre.array() > T(0)).select(dy.array(), T(kLeakySlope) * dy.array()).matrix();
}

/// x * W + b.
template <class T>
Mat<T> dense(const Params<T>& p, int w, int b, const Mat<T>& x) {
  Mat<T> out = x * p.tensor(w);
  out.rowwise() += p.tensor(b).row(0);
  return out;
}

/// Accumulates dW, db into `grad` and returns dL/dx (skipped when want_dx is false).
template <class T>
Mat<T> dense_backward(const Params<T>& p, int w, int b, const Mat<T>& x, const Mat<T>& dy, Params<T>& grad,
                      bool want_dx = true) {
  grad.tensor(w).noalias() += x.transpose() * dy;
  grad.tensor(b).row(0) += dy.colwise().sum();
  if (!want_dx) return {};
  return dy * p.tensor(w).transpose();
}

/// Sinusoidal embedding of diffusion time k + 1: [sin(tau f_i), cos(tau f_i)],
/// f_i = 10000^(-i / (dim/2)).
template <class T>
RowVec<T> time_embedding(int k, int dim) {
  RowVec<T> e(dim);
  const int half = dim / 2;
  const double tau = static_cast<double>(k + 1);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
    e(i) = static_cast<T>(std::sin(tau * freq));
    e(i + half) = static_cast<T>(std::cos(tau * freq));
  }
  if (dim % 2 == 1) e(dim - 1) = T(0);
  return e;
}

/// Adam with bias correction, operating on a flat parameter vector.
template <class T>
class Adam {
 public:
  Adam() = default;
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Vec<T>& params, const Vec<T>& grad) {
    if (m_.size() != params.size()) {
      m_ = Vec<T>::Zero(params.size());
      v_ = Vec<T>::Zero(params.size());
      t_ = 0;
    }
    if (lr_ == 0.0) return;
    ++t_;
    m_ = T(beta1_) * m_ + T(1.0 - beta1_) * grad;
    v_ = T(beta2_) * v_ + T(1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T step_size = static_cast<T>(lr_ / c1);
    params.array() -= step_size * m_.array() / ((v_.array() / T(c2)).sqrt() + T(eps_));
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  Vec<T> m_;
  Vec<T> v_;
  long t_ = 0;
};

/// Gathers 3x3 zero-padded neighbourhoods of `channels` stacked images
/// (each height*width, row-major) into rows of length channels*9, one row per
/// pixel. Feature order: channel-major, then (dr, dc) row-major.
template <class T>
void im2col3x3(const std::vector<const T*>& channels, int height, int width, Eigen::Ref<Mat<T>> out) {
  const int nc = static_cast<int>(channels.size());
  out.setZero();
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Index row = static_cast<Index>(r) * width + c;
      for (int ch = 0; ch < nc; ++ch) {
        const T* src = channels[static_cast<std::size_t>(ch)];
        for (int dr = -1; dr <= 1; ++dr) {
          const int rr = r + dr;
          if (rr < 0 || rr >= height) continue;
          for (int dc = -1; dc <= 1; ++dc) {
            const int cc = c + dc;
            if (cc < 0 || cc >= width) continue;
            out(row, ch * 9 + (dr + 1) * 3 + (dc + 1)) = src[rr * width + cc];
          }
        }
      }
    }
  }
}

}  // namespace atd::nn
