#include "atd/permanent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace atd {

void GaussianMixture::validate() const {
  require(components() >= 1, "mixture needs at least one component");
  require(weights.size() == components() && variances.size() == components(), "mixture parameter sizes differ");
  require((weights.array() >= 0.0).all() && std::abs(weights.sum() - 1.0) < 1e-9, "mixture weights must sum to 1");
  require((variances.array() > 0.0).all(), "mixture variances must be positive");
}

double GaussianMixture::diffused_log_density(const Field& x, double alpha_bar) const {
  const double sab = std::sqrt(alpha_bar);
  const double d = static_cast<double>(dim());
  Eigen::VectorXd logs(components());
  for (Index k = 0; k < components(); ++k) {
    const double v = alpha_bar * variances[k] + 1.0 - alpha_bar;
    const double sq = (x.matrix().transpose() - sab * means.row(k)).squaredNorm();
    logs[k] = std::log(weights[k]) - 0.5 * d * std::log(2.0 * M_PI * v) - 0.5 * sq / v;
  }
  const double m = logs.maxCoeff();
  return m + std::log((logs.array() - m).exp().sum());
}

void TrainBuffer::add(Field sample) {
  require(samples_.empty() || sample.size() == pixels(), "TrainBuffer: sample shape differs from buffer");
  if (capacity_ == 0) return;
  if (samples_.size() == capacity_) samples_.erase(samples_.begin());
  samples_.push_back(std::move(sample));
}

void TrainBuffer::add_batch(const FieldBatch& batch) {
  for (Index r = 0; r < batch.rows(); ++r) add(batch.row(r).transpose());
}

FieldBatch TrainBuffer::as_batch() const {
  FieldBatch out(static_cast<Index>(samples_.size()), pixels());
  for (std::size_t i = 0; i < samples_.size(); ++i) out.row(static_cast<Index>(i)) = samples_[i].transpose();
  return out;
}

const char* to_string(ScoreBackend backend) {
  return backend == ScoreBackend::AnalyticGmm ? "analytic-gmm" : "tiny-denoiser";
}

ScoreModel ScoreModel::analytic(GaussianMixture mixture, NoiseSchedule schedule) {
  mixture.validate();
  ScoreModel m;
  m.backend_ = ScoreBackend::AnalyticGmm;
  m.schedule_ = std::move(schedule);
  m.mixture_ = std::make_shared<const GaussianMixture>(std::move(mixture));
  return m;
}

ScoreModel ScoreModel::denoiser(int pixels, NoiseSchedule schedule, std::uint64_t seed, DenoiserConfig cfg) {
  require(pixels >= 1, "denoiser needs at least one pixel");
  ScoreModel m;
  m.backend_ = ScoreBackend::TinyDenoiser;
  m.schedule_ = std::move(schedule);
  nn::Layout layout;
  m.shape_ = detail::DenoiserShape::make(pixels, cfg.hidden, cfg.time_dim, m.schedule_.steps(), layout);
  m.params_ = nn::Params<float>(layout);
  Rng rng(seed);
  m.params_.init_he(m.shape_.w1, pixels, rng);
  m.params_.init_he(m.shape_.wt1, cfg.time_dim, rng);
  m.params_.init_he(m.shape_.w2, cfg.hidden, rng);
  m.params_.init_he(m.shape_.wt2, cfg.time_dim, rng);
  m.params_.init_he(m.shape_.w3, cfg.hidden, rng);
  m.params_.tensor(m.shape_.w3) *= 0.1f;
  return m;
}

Index ScoreModel::pixels() const {
  return backend_ == ScoreBackend::AnalyticGmm ? mixture_->dim() : shape_.pixels;
}

const GaussianMixture& ScoreModel::mixture() const {
  require(backend_ == ScoreBackend::AnalyticGmm, "mixture(): not an analytic model");
  return *mixture_;
}

const nn::Params<float>& ScoreModel::denoiser_params() const {
  require(backend_ == ScoreBackend::TinyDenoiser, "denoiser_params(): not a denoiser");
  return params_;
}

const detail::DenoiserShape& ScoreModel::denoiser_shape() const {
  require(backend_ == ScoreBackend::TinyDenoiser, "denoiser_shape(): not a denoiser");
  return shape_;
}

ScoreModel ScoreModel::with_params(nn::Params<float> params) const {
  require(backend_ == ScoreBackend::TinyDenoiser, "with_params(): not a denoiser");
  require(params.layout() == params_.layout(), "with_params(): parameter layout mismatch");
  ScoreModel m = *this;
  m.params_ = std::move(params);
  return m;
}

namespace {

// eps_hat = -sqrt(1 - ab) * grad log p_t(x) for the diffused mixture.
void gmm_eps(const GaussianMixture& g, double ab, const double* x, double* out, Index dim) {
  const double sab = std::sqrt(ab);
  const Index K = g.components();
  Eigen::Map<const Eigen::RowVectorXd> xv(x, dim);
  Eigen::VectorXd logr(K), var(K);
  for (Index k = 0; k < K; ++k) {
    var[k] = ab * g.variances[k] + 1.0 - ab;
    const double sq = (xv - sab * g.means.row(k)).squaredNorm();
    logr[k] = std::log(g.weights[k]) - 0.5 * static_cast<double>(dim) * std::log(var[k]) - 0.5 * sq / var[k];
  }
  const double m = logr.maxCoeff();
  Eigen::VectorXd r = (logr.array() - m).exp();
  r /= r.sum();
  Eigen::RowVectorXd score = Eigen::RowVectorXd::Zero(dim);
  for (Index k = 0; k < K; ++k) score += (r[k] / var[k]) * (sab * g.means.row(k) - xv);
  Eigen::Map<Eigen::RowVectorXd>(out, dim) = -std::sqrt(1.0 - ab) * score;
}

}  // namespace

FieldBatch ScoreModel::predict_eps(const FieldBatch& x_t, std::span<const int> ks) const {
  require(static_cast<Index>(ks.size()) == x_t.rows(), "predict_eps: one step index per row required");
  require(x_t.cols() == pixels(), "predict_eps: grid size mismatch");
  FieldBatch out(x_t.rows(), x_t.cols());
  if (backend_ == ScoreBackend::AnalyticGmm) {
    for (Index r = 0; r < x_t.rows(); ++r)
      gmm_eps(*mixture_, schedule_.alpha_bar(ks[static_cast<std::size_t>(r)]), x_t.row(r).data(), out.row(r).data(),
              x_t.cols());
    return out;
  }
  for (int k : ks) schedule_.alpha_bar(k);  // range check
  detail::DenoiserCache<float> cache;
  nn::Mat<float> xf = x_t.matrix().cast<float>();
  detail::denoiser_forward(shape_, params_, schedule_, xf, ks, cache);
  out = cache.eps.cast<double>().array();
  return out;
}

FieldBatch ScoreModel::predict_eps(const FieldBatch& x_t, int k) const {
  std::vector<int> ks(static_cast<std::size_t>(x_t.rows()), k);
  return predict_eps(x_t, ks);
}

Field ScoreModel::predict_eps(const Field& x_t, int k) const {
  FieldBatch b = x_t.transpose();
  return predict_eps(b, k).row(0).transpose();
}

std::uint64_t ScoreModel::checksum() const {
  if (backend_ == ScoreBackend::TinyDenoiser) return nn::checksum(params_);
  nn::Params<double> flat;
  nn::Layout layout;
  layout.add("means", mixture_->means.rows(), mixture_->means.cols());
  layout.add("weights", mixture_->weights.size(), 1);
  layout.add("variances", mixture_->variances.size(), 1);
  flat = nn::Params<double>(layout);
  flat.tensor(0) = mixture_->means;
  flat.tensor(1) = mixture_->weights;
  flat.tensor(2) = mixture_->variances;
  return nn::checksum(flat);
}

Checkpoint ScoreModel::to_checkpoint() const {
  Checkpoint c;
  c.role = "permanent";
  c.backend = to_string(backend_);
  c.schedule_hash = schedule_.hash();
  if (backend_ == ScoreBackend::AnalyticGmm) {
    const auto& g = *mixture_;
    auto put = [&c](const std::string& name, const Eigen::MatrixXd& m) {
      NamedTensor t{name, m.rows(), m.cols(), {}};
      for (Index r = 0; r < m.rows(); ++r)
        for (Index col = 0; col < m.cols(); ++col) t.data.push_back(m(r, col));
      c.tensors.push_back(std::move(t));
    };
    put("means", g.means);
    put("weights", g.weights);
    put("variances", g.variances);
  } else {
    c.meta["pixels"] = std::to_string(shape_.pixels);
    c.meta["hidden"] = std::to_string(shape_.hidden);
    c.meta["time_dim"] = std::to_string(shape_.time_dim);
    append_params(c, params_);
  }
  return c;
}

ScoreModel ScoreModel::from_checkpoint(const Checkpoint& ckpt, NoiseSchedule schedule) {
  require(ckpt.role == "permanent", "checkpoint role '" + ckpt.role + "' is not 'permanent'");
  require(ckpt.schedule_hash == schedule.hash(), "checkpoint was trained under a different noise schedule");
  if (ckpt.backend == "analytic-gmm") {
    auto get = [&ckpt](const std::string& name) {
      const auto& t = ckpt.tensor(name);
      Eigen::MatrixXd m(t.rows, t.cols);
      for (Index r = 0; r < t.rows; ++r)
        for (Index c = 0; c < t.cols; ++c) m(r, c) = t.data[static_cast<std::size_t>(r * t.cols + c)];
      return m;
    };
    GaussianMixture g{get("means"), get("weights"), get("variances")};
    return analytic(std::move(g), std::move(schedule));
  }
  require(ckpt.backend == "tiny-denoiser", "unknown permanent backend '" + ckpt.backend + "'");
  DenoiserConfig cfg{ckpt.meta_int("hidden"), ckpt.meta_int("time_dim")};
  ScoreModel m = denoiser(ckpt.meta_int("pixels"), std::move(schedule), 0, cfg);
  restore_params(ckpt, m.params_);
  return m;
}

namespace {

TrainResult train_denoiser(ScoreModel model, const TrainBuffer& buffer, const TrainOptions& opt,
                           const detail::DenoiserShape& shape, nn::Params<float> params) {
  require(!buffer.empty(), "training buffer is empty");
  require(buffer.pixels() == shape.pixels, "training buffer grid size does not match the model");
  require(opt.epochs >= 0 && opt.batch_size >= 1, "invalid training options");
  const NoiseSchedule& schedule = model.schedule();
  const int T = schedule.steps();
  Rng rng(opt.seed);
  nn::Adam<float> adam(opt.lr);
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  detail::DenoiserCache<float> cache;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      const Index n = static_cast<Index>(end - start);
      nn::Mat<float> xt(n, shape.pixels), eps(n, shape.pixels);
      std::vector<int> ks(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) {
        const Field& x0 = buffer[order[start + static_cast<std::size_t>(i)]];
        const int k = static_cast<int>(rng.uniform_index(T));
        ks[static_cast<std::size_t>(i)] = k;
        Field e = rng.normal_field(shape.pixels);
        const double ab = schedule.alpha_bar(k);
        xt.row(i) = (std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * e).matrix().transpose().cast<float>();
        eps.row(i) = e.matrix().transpose().cast<float>();
      }
      detail::denoiser_forward(shape, params, schedule, xt, ks, cache);
      nn::Mat<float> diff = cache.eps - eps;
      double loss = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double w = dsm_weight(schedule, ks[static_cast<std::size_t>(i)], opt.snr_cap);
        loss += w * static_cast<double>(diff.row(i).squaredNorm());
        diff.row(i) *= static_cast<float>(w);
      }
      epoch_loss += loss;
      seen += static_cast<std::size_t>(n);
      nn::Params<float> grad = params.zeros_like();
      nn::Mat<float> d_eps = diff * (2.0f / static_cast<float>(n));
      detail::denoiser_backward(shape, params, schedule, cache, d_eps, grad);
      adam.step(params.values(), grad.values());
    }
    history.push_back(epoch_loss / static_cast<double>(seen));
  }
  return {model.with_params(std::move(params)), std::move(history)};
}

}  // namespace

TrainResult pretrain_denoiser(const TrainBuffer& buffer, const NoiseSchedule& schedule, const TrainOptions& opt,
                              DenoiserConfig cfg) {
  require(!buffer.empty(), "pretrain_denoiser: empty buffer");
  ScoreModel fresh = ScoreModel::denoiser(static_cast<int>(buffer.pixels()), schedule, derive_seed(opt.seed, 1), cfg);
  return train_denoiser(fresh, buffer, opt, fresh.denoiser_shape(), fresh.denoiser_params());
}

TrainResult update_permanent(const ScoreModel& model, const TrainBuffer& buffer, const TrainOptions& opt) {
  require(model.trainable(), "update_permanent: the analytic backend cannot be updated");
  require(!buffer.empty(), "update_permanent: empty buffer");
  return train_denoiser(model, buffer, opt, model.denoiser_shape(), model.denoiser_params());
}

}  // namespace atd
