#pragma once

#include <cstdint>
#include <vector>

#include "atd/checkpoint.hpp"
#include "atd/nn.hpp"

namespace atd {

namespace detail {

/// 3x3 single-channel convolution over the patch (zero padded), then dense
/// layers A -> 4 -> 32 -> 16 -> 8 -> 2 with leaky ReLU in between. Softmax of
/// the two logits; the first entry is the target probability.
struct RewardShape {
  int patch_h = 1;
  int patch_w = 1;
  int conv_w = -1, conv_b = -1;
  std::vector<int> w, b;

  int area() const { return patch_h * patch_w; }
  static RewardShape make(int patch_h, int patch_w, nn::Layout& layout);
};

}  // namespace detail

/// Labelled patches gathered during a run, one per executed query.
class SupervisedStore {
 public:
  explicit SupervisedStore(int patch_area = 1) : area_(patch_area) {}

  /// Throws for a wrong patch size or a label outside [0, 1].
  void add(const Field& patch, double label);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  int patch_area() const { return area_; }
  const std::vector<Field>& patches() const { return patches_; }
  const std::vector<double>& labels() const { return labels_; }

 private:
  int area_;
  std::vector<Field> patches_;
  std::vector<double> labels_;
};

class RewardModel {
 public:
  RewardModel() = default;

  /// Hidden layers randomly initialised, output layer zero: predicts 0.5 everywhere.
  static RewardModel create(int patch_h, int patch_w, std::uint64_t seed);
  /// Every parameter zero.
  static RewardModel all_zero(int patch_h, int patch_w);

  int patch_area() const { return shape_.area(); }
  const detail::RewardShape& shape() const { return shape_; }
  const nn::Params<double>& params() const { return params_; }
  RewardModel with_params(nn::Params<double> params) const;

  /// Target probability for one flattened patch.
  double predict(const Field& patch) const;
  /// One patch per row.
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& patches) const;

  std::uint64_t checksum() const { return nn::checksum(params_); }
  Checkpoint to_checkpoint() const;
  static RewardModel from_checkpoint(const Checkpoint& ckpt);

 private:
  detail::RewardShape shape_;
  nn::Params<double> params_;
};

double reward_predict(const RewardModel& r, const Field& patch);

/// Mean binary cross-entropy of target probabilities against soft labels.
/// Writes parameter gradients into `grad` when non-null.
template <class T>
T reward_loss_and_grad(const detail::RewardShape& shape, const nn::Params<T>& params,
                       const nn::Mat<T>& patches, const nn::Vec<T>& labels, nn::Params<T>* grad);

struct RewardOptions {
  int epochs = 3;
  double lr = 0.01;
  int batch_size = 32;
  std::uint64_t seed = 0;
  /// Negative: soft labels. Otherwise labels become 1 when >= threshold, else 0.
  double label_threshold = -1.0;
};

struct RewardUpdateResult {
  RewardModel model;
  std::vector<double> epoch_loss;  // mean BCE over the store: before training, then after each epoch
};

/// Adam on BCE over the store; returns the trained copy. Throws on an empty store.
RewardUpdateResult reward_update(const RewardModel& r, const SupervisedStore& store, const RewardOptions& opt);

}  // namespace atd
