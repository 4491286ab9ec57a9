#include "atd/transient.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace atd {

HModel HModel::zero_output(const GridShape& grid, NoiseSchedule schedule, std::uint64_t seed, HModelConfig cfg) {
  HModel h = all_zero(grid, std::move(schedule), cfg);
  Rng rng(seed);
  h.params_.init_he(h.shape_.w1, detail::kHInputChannels * 9, rng);
  h.params_.init_he(h.shape_.wt, cfg.time_dim, rng);
  h.params_.init_he(h.shape_.w2, cfg.width1, rng);
  return h;
}

HModel HModel::all_zero(const GridShape& grid, NoiseSchedule schedule, HModelConfig cfg) {
  grid.validate();
  require(cfg.width1 >= 1 && cfg.width2 >= 1 && cfg.time_dim >= 2, "invalid h-model widths");
  HModel h;
  nn::Layout layout;
  h.shape_ = detail::HShape::make(grid.height, grid.width, cfg.width1, cfg.width2, cfg.time_dim, layout);
  h.params_ = nn::Params<float>(layout);
  h.schedule_ = std::move(schedule);
  return h;
}

HModel HModel::with_params(nn::Params<float> params) const {
  require(params.layout() == params_.layout(), "HModel::with_params: layout mismatch");
  HModel h = *this;
  h.params_ = std::move(params);
  return h;
}

bool HModel::output_is_zero() const {
  return params_.tensor_is_zero(shape_.w3) && params_.tensor_is_zero(shape_.b3);
}

FieldBatch HModel::correct(const FieldBatch& x_t, const FieldBatch& x0_hat, const ObservationSet& obs, int k) const {
  require(x_t.cols() == shape_.pixels() && x0_hat.cols() == shape_.pixels() && x0_hat.rows() == x_t.rows(),
          "h-model input shape mismatch");
  require(obs.values().size() == shape_.pixels(), "observation grid does not match the h-model");
  schedule_.alpha_bar(k);  // range check on k
  if (output_is_zero()) return FieldBatch::Zero(x_t.rows(), x_t.cols());
  std::vector<int> ks(static_cast<std::size_t>(x_t.rows()), k);
  detail::HCache<float> cache;
  nn::Mat<float> xt = x_t.matrix().cast<float>();
  nn::Mat<float> x0 = x0_hat.matrix().cast<float>();
  nn::RowVec<float> ov = obs.values().matrix().transpose().cast<float>();
  nn::RowVec<float> om = obs.mask().matrix().transpose().cast<float>();
  nn::Mat<float> out = detail::h_forward(shape_, params_, schedule_, xt, x0, ov, om, ks, cache);
  return out.cast<double>().array();
}

Checkpoint HModel::to_checkpoint() const {
  Checkpoint c;
  c.role = "transient";
  c.backend = "h-conv";
  c.schedule_hash = schedule_.hash();
  c.meta["height"] = std::to_string(shape_.height);
  c.meta["width"] = std::to_string(shape_.width);
  c.meta["width1"] = std::to_string(shape_.c1);
  c.meta["width2"] = std::to_string(shape_.c2);
  c.meta["time_dim"] = std::to_string(shape_.time_dim);
  append_params(c, params_);
  return c;
}

HModel HModel::from_checkpoint(const Checkpoint& ckpt, NoiseSchedule schedule) {
  require(ckpt.role == "transient", "checkpoint role '" + ckpt.role + "' is not 'transient'");
  require(ckpt.schedule_hash == schedule.hash(), "checkpoint was trained under a different noise schedule");
  GridShape grid{ckpt.meta_int("height"), ckpt.meta_int("width"), 1, 1};
  HModelConfig cfg{ckpt.meta_int("width1"), ckpt.meta_int("width2"), ckpt.meta_int("time_dim")};
  HModel h = all_zero(grid, std::move(schedule), cfg);
  restore_params(ckpt, h.params_);
  return h;
}

Field h_correct(const HModel& h, const Field& x_t, const Field& x0_hat, const ObservationSet& obs, int k) {
  FieldBatch xt = x_t.transpose();
  FieldBatch x0 = x0_hat.transpose();
  return h.correct(xt, x0, obs, k).row(0).transpose();
}

DsmBatch make_dsm_batch(const FieldBatch& x0, int steps, Rng& rng) {
  DsmBatch b;
  b.x0 = x0;
  b.ks.resize(static_cast<std::size_t>(x0.rows()));
  b.eps.resize(x0.rows(), x0.cols());
  for (Index i = 0; i < x0.rows(); ++i) {
    b.ks[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_index(steps));
    for (Index j = 0; j < x0.cols(); ++j) b.eps(i, j) = rng.normal();
  }
  return b;
}

template <class T>
T dsm_loss_and_grad(const detail::HShape& shape, const nn::Params<T>& params, const ScoreModel& prior,
                    const DsmBatch& batch, const ObservationSet& obs, nn::Params<T>* grad, double snr_cap) {
  require(batch.size() > 0, "dsm_loss: empty batch");
  require(batch.x0.cols() == shape.pixels() && prior.pixels() == shape.pixels(), "dsm_loss: grid size mismatch");
  const NoiseSchedule& schedule = prior.schedule();
  const Index n = batch.size();

  FieldBatch noisy(n, batch.x0.cols());
  for (Index i = 0; i < n; ++i) {
    const double ab = schedule.alpha_bar(batch.ks[static_cast<std::size_t>(i)]);
    noisy.row(i) = std::sqrt(ab) * batch.x0.row(i) + std::sqrt(1.0 - ab) * batch.eps.row(i);
  }
  const FieldBatch eps_theta = prior.predict_eps(noisy, batch.ks);
  FieldBatch x0_hat(n, batch.x0.cols());
  for (Index i = 0; i < n; ++i) {
    const double ab = schedule.alpha_bar(batch.ks[static_cast<std::size_t>(i)]);
    x0_hat.row(i) = (noisy.row(i) - std::sqrt(1.0 - ab) * eps_theta.row(i)) / std::sqrt(ab);
  }

  detail::HCache<T> cache;
  nn::Mat<T> xt = noisy.matrix().cast<T>();
  nn::Mat<T> x0 = x0_hat.matrix().cast<T>();
  nn::RowVec<T> ov = obs.values().matrix().transpose().cast<T>();
  nn::RowVec<T> om = obs.mask().matrix().transpose().cast<T>();
  nn::Mat<T> out = detail::h_forward(shape, params, schedule, xt, x0, ov, om, batch.ks, cache);
  nn::Mat<T> resid = out + eps_theta.matrix().cast<T>() - batch.eps.matrix().cast<T>();
  T loss = 0;
  for (Index i = 0; i < n; ++i) {
    const T w = static_cast<T>(dsm_weight(schedule, batch.ks[static_cast<std::size_t>(i)], snr_cap));
    loss += w * resid.row(i).squaredNorm();
    resid.row(i) *= w;
  }
  loss /= static_cast<T>(n);
  if (grad != nullptr) {
    nn::Mat<T> d_out = resid * (T(2) / static_cast<T>(n));
    detail::h_backward(shape, params, schedule, cache, d_out, *grad);
  }
  return loss;
}

template float dsm_loss_and_grad<float>(const detail::HShape&, const nn::Params<float>&, const ScoreModel&,
                                        const DsmBatch&, const ObservationSet&, nn::Params<float>*, double);
template double dsm_loss_and_grad<double>(const detail::HShape&, const nn::Params<double>&, const ScoreModel&,
                                          const DsmBatch&, const ObservationSet&, nn::Params<double>*, double);

double dsm_loss(const HModel& h, const ScoreModel& prior, const DsmBatch& batch, const ObservationSet& obs,
                double snr_cap) {
  require(h.schedule().hash() == prior.schedule().hash(), "h-model and prior use different schedules");
  return static_cast<double>(dsm_loss_and_grad<float>(h.shape(), h.params(), prior, batch, obs, nullptr, snr_cap));
}

namespace {

DsmBatch slice(const DsmBatch& b, Index start, Index count) {
  DsmBatch out;
  out.x0 = b.x0.middleRows(start, count);
  out.eps = b.eps.middleRows(start, count);
  out.ks.assign(b.ks.begin() + start, b.ks.begin() + start + count);
  return out;
}

}  // namespace

HTrainResult train_h(const HModel& h, const ScoreModel& prior, const TrainBuffer& buffer, const ObservationSet& obs,
                     const HTrainOptions& opt) {
  require(!buffer.empty(), "train_h: empty buffer");
  require(opt.epochs >= 0 && opt.batch_size >= 0, "train_h: invalid options");
  require(h.schedule().hash() == prior.schedule().hash(), "h-model and prior use different schedules");
  const FieldBatch x0 = buffer.as_batch();
  const Index n = x0.rows();
  const Index bs = opt.batch_size == 0 ? n : std::min<Index>(opt.batch_size, n);
  nn::Params<float> params = h.params();
  nn::Adam<float> adam(opt.lr);
  Rng rng(opt.seed);
  std::vector<double> history;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const DsmBatch full = make_dsm_batch(x0, prior.schedule().steps(), rng);
    double total = 0.0;
    for (Index start = 0; start < n; start += bs) {
      const Index count = std::min(bs, n - start);
      const DsmBatch part = count == n ? full : slice(full, start, count);
      nn::Params<float> grad = params.zeros_like();
      total += static_cast<double>(dsm_loss_and_grad<float>(h.shape(), params, prior, part, obs, &grad, opt.snr_cap)) *
               static_cast<double>(count);
      adam.step(params.values(), grad.values());
    }
    history.push_back(total / static_cast<double>(n));
  }
  return {h.with_params(std::move(params)), std::move(history)};
}

double update_interval(int budget, int updates, double gamma, int i) {
  require(updates >= 1, "update count must be at least 1");
  return static_cast<double>(budget) / updates *
         std::pow(1.0 - static_cast<double>(i) / (updates + 1), gamma);
}

std::vector<int> schedule_updates(int budget, int updates, double gamma) {
  require(updates >= 1, "schedule_updates: U must be at least 1");
  require(gamma >= 1.0, "schedule_updates: gamma must be at least 1");
  require(budget >= updates, "schedule_updates: budget must be at least U");
  std::vector<int> out;
  double cumulative = 0.0;
  for (int i = 0; i < updates; ++i) {
    cumulative += update_interval(budget, updates, gamma, i);
    const int step = std::min(static_cast<int>(std::lround(cumulative)), budget - 1);
    if (out.empty() || step > out.back()) out.push_back(step);
  }
  return out;
}

std::vector<int> uniform_updates(int budget, int every) {
  require(every >= 1, "uniform_updates: interval must be at least 1");
  std::vector<int> out;
  for (int s = every; s < budget; s += every) out.push_back(s);
  return out;
}

}  // namespace atd
