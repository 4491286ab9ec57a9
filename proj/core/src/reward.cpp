#include "atd/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace atd {

namespace detail {

RewardShape RewardShape::make(int patch_h, int patch_w, nn::Layout& layout) {
  require(patch_h >= 1 && patch_w >= 1, "reward model patch dimensions must be positive");
  RewardShape s;
  s.patch_h = patch_h;
  s.patch_w = patch_w;
  s.conv_w = layout.add("conv_w", 9, 1);
  s.conv_b = layout.add("conv_b", 1, 1);
  const int widths[] = {s.area(), 4, 32, 16, 8, 2};
  for (int l = 0; l < 5; ++l) {
    s.w.push_back(layout.add("w" + std::to_string(l), widths[l], widths[l + 1]));
    s.b.push_back(layout.add("b" + std::to_string(l), 1, widths[l + 1]));
  }
  return s;
}

template <class T>
struct RewardCache {
  nn::Mat<T> cols, conv_pre;
  std::vector<nn::Mat<T>> inputs, pre;
};

template <class T>
nn::Mat<T> reward_forward(const RewardShape& s, const nn::Params<T>& p, const nn::Mat<T>& x, RewardCache<T>& c) {
  const Index n = x.rows();
  const Index a = s.area();
  c.cols.resize(n * a, 9);
  for (Index i = 0; i < n; ++i) {
    std::vector<const T*> channel{x.row(i).data()};
    nn::im2col3x3<T>(channel, s.patch_h, s.patch_w, c.cols.middleRows(i * a, a));
  }
  c.conv_pre = nn::dense(p, s.conv_w, s.conv_b, c.cols);
  nn::Mat<T> h = Eigen::Map<const nn::Mat<T>>(c.conv_pre.data(), n, a);
  h = nn::leaky_relu(h);
  c.inputs.clear();
  c.pre.clear();
  for (std::size_t l = 0; l < s.w.size(); ++l) {
    c.inputs.push_back(h);
    c.pre.push_back(nn::dense(p, s.w[l], s.b[l], h));
    h = l + 1 < s.w.size() ? nn::leaky_relu(c.pre.back()) : c.pre.back();
  }
  return h;
}

template <class T>
void reward_backward(const RewardShape& s, const nn::Params<T>& p, const RewardCache<T>& c, const nn::Mat<T>& d_logits,
                     nn::Params<T>& grad) {
  nn::Mat<T> d = d_logits;
  for (std::size_t l = s.w.size(); l-- > 0;) {
    if (l + 1 < s.w.size()) d = nn::leaky_relu_backward(c.pre[l], d);
    d = nn::dense_backward(p, s.w[l], s.b[l], c.inputs[l], d, grad);
  }
  const Index n = d.rows();
  nn::Mat<T> d_flat = Eigen::Map<const nn::Mat<T>>(d.data(), n * s.area(), 1);
  d_flat = nn::leaky_relu_backward(c.conv_pre, d_flat);
  nn::dense_backward(p, s.conv_w, s.conv_b, c.cols, d_flat, grad, false);
}

}  // namespace detail

void SupervisedStore::add(const Field& patch, double label) {
  require(patch.size() == area_, "patch size does not match the store");
  require(label >= 0.0 && label <= 1.0, "reward label must lie in [0, 1]");
  patches_.push_back(patch);
  labels_.push_back(label);
}

RewardModel RewardModel::all_zero(int patch_h, int patch_w) {
  RewardModel r;
  nn::Layout layout;
  r.shape_ = detail::RewardShape::make(patch_h, patch_w, layout);
  r.params_ = nn::Params<double>(layout);
  return r;
}

RewardModel RewardModel::create(int patch_h, int patch_w, std::uint64_t seed) {
  RewardModel r = all_zero(patch_h, patch_w);
  Rng rng(seed);
  r.params_.init_he(r.shape_.conv_w, 9, rng);
  const std::size_t layers = r.shape_.w.size();
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const int id = r.shape_.w[l];
    r.params_.init_he(id, r.params_.layout().slot(id).rows, rng);
  }
  return r;
}

RewardModel RewardModel::with_params(nn::Params<double> params) const {
  require(params.layout() == params_.layout(), "RewardModel::with_params: layout mismatch");
  RewardModel r = *this;
  r.params_ = std::move(params);
  return r;
}

namespace {

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

template <class T>
T softplus(T z) {
  return z > T(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace

Eigen::VectorXd RewardModel::predict_batch(const Eigen::MatrixXd& patches) const {
  require(patches.cols() == patch_area(), "patch size does not match the reward model");
  detail::RewardCache<double> cache;
  nn::Mat<double> x = patches;
  const nn::Mat<double> logits = detail::reward_forward(shape_, params_, x, cache);
  Eigen::VectorXd out(patches.rows());
  for (Index i = 0; i < out.size(); ++i) out(i) = sigmoid(logits(i, 0) - logits(i, 1));
  return out;
}

double RewardModel::predict(const Field& patch) const {
  require(patch.size() == patch_area(), "patch size does not match the reward model");
  Eigen::MatrixXd x = patch.matrix().transpose();
  return predict_batch(x)(0);
}

double reward_predict(const RewardModel& r, const Field& patch) { return r.predict(patch); }

Checkpoint RewardModel::to_checkpoint() const {
  Checkpoint c;
  c.role = "reward";
  c.backend = "reward-mlp";
  c.meta["patch_h"] = std::to_string(shape_.patch_h);
  c.meta["patch_w"] = std::to_string(shape_.patch_w);
  append_params(c, params_);
  return c;
}

RewardModel RewardModel::from_checkpoint(const Checkpoint& ckpt) {
  require(ckpt.role == "reward", "checkpoint role '" + ckpt.role + "' is not 'reward'");
  RewardModel r = all_zero(ckpt.meta_int("patch_h"), ckpt.meta_int("patch_w"));
  restore_params(ckpt, r.params_);
  return r;
}

template <class T>
T reward_loss_and_grad(const detail::RewardShape& shape, const nn::Params<T>& params, const nn::Mat<T>& patches,
                       const nn::Vec<T>& labels, nn::Params<T>* grad) {
  const Index n = patches.rows();
  require(n > 0 && labels.size() == n, "reward loss: empty or mismatched batch");
  detail::RewardCache<T> cache;
  const nn::Mat<T> logits = detail::reward_forward(shape, params, patches, cache);
  T loss = 0;
  nn::Mat<T> d_logits(n, 2);
  for (Index i = 0; i < n; ++i) {
    const T z = logits(i, 0) - logits(i, 1);
    loss += softplus(z) - labels(i) * z;
    const T p = static_cast<T>(sigmoid(static_cast<double>(z)));
    d_logits(i, 0) = (p - labels(i)) / static_cast<T>(n);
    d_logits(i, 1) = -d_logits(i, 0);
  }
  if (grad != nullptr) detail::reward_backward(shape, params, cache, d_logits, *grad);
  return loss / static_cast<T>(n);
}

template double reward_loss_and_grad<double>(const detail::RewardShape&, const nn::Params<double>&,
                                             const nn::Mat<double>&, const nn::Vec<double>&, nn::Params<double>*);
template float reward_loss_and_grad<float>(const detail::RewardShape&, const nn::Params<float>&,
                                           const nn::Mat<float>&, const nn::Vec<float>&, nn::Params<float>*);

RewardUpdateResult reward_update(const RewardModel& r, const SupervisedStore& store, const RewardOptions& opt) {
  require(!store.empty(), "reward_update: empty store");
  require(store.patch_area() == r.patch_area(), "reward_update: store patch size differs from the model");
  require(opt.epochs >= 0 && opt.batch_size >= 1, "reward_update: invalid options");
  const Index n = static_cast<Index>(store.size());
  nn::Mat<double> x(n, r.patch_area());
  nn::Vec<double> y(n);
  for (Index i = 0; i < n; ++i) {
    x.row(i) = store.patches()[static_cast<std::size_t>(i)].matrix().transpose();
    const double label = store.labels()[static_cast<std::size_t>(i)];
    y(i) = opt.label_threshold < 0.0 ? label : (label >= opt.label_threshold ? 1.0 : 0.0);
  }
  nn::Params<double> params = r.params();
  nn::Adam<double> adam(opt.lr);
  Rng rng(opt.seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<double> history{reward_loss_and_grad<double>(r.shape(), params, x, y, nullptr)};
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (Index start = 0; start < n; start += opt.batch_size) {
      const Index count = std::min<Index>(opt.batch_size, n - start);
      nn::Mat<double> bx(count, x.cols());
      nn::Vec<double> by(count);
      for (Index i = 0; i < count; ++i) {
        bx.row(i) = x.row(order[static_cast<std::size_t>(start + i)]);
        by(i) = y(order[static_cast<std::size_t>(start + i)]);
      }
      nn::Params<double> grad = params.zeros_like();
      reward_loss_and_grad<double>(r.shape(), params, bx, by, &grad);
      adam.step(params.values(), grad.values());
    }
    history.push_back(reward_loss_and_grad<double>(r.shape(), params, x, y, nullptr));
  }
  return {r.with_params(std::move(params)), std::move(history)};
}

}  // namespace atd
