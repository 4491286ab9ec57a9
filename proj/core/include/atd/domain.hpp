#pragma once

#include <span>
#include <utility>
#include <vector>

#include "atd/types.hpp"

namespace atd {

/// Grid of height x width cells partitioned into patch_h x patch_w query blocks.
/// Query indices run row-major over the patch grid.
struct GridShape {
  int height = 0;
  int width = 0;
  int patch_h = 1;
  int patch_w = 1;

  int patch_rows() const { return height / patch_h; }
  int patch_cols() const { return width / patch_w; }
  int candidates() const { return patch_rows() * patch_cols(); }
  int pixels() const { return height * width; }
  int patch_area() const { return patch_h * patch_w; }

  /// Throws InvalidArgument if dimensions are non-positive or patches do not tile the grid.
  void validate() const;

  /// Flat pixel indices covered by query q, row-major inside the patch.
  std::vector<Index> patch_pixels(int q) const;

  /// Gathers the patch of a field into a patch_area-length vector.
  Field gather(const Field& field, int q) const;

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

struct SearchTask {
  GridShape grid;
  Field content;      // values in [0, 1]
  Field target_mask;  // binary
  int budget = 0;

  /// Fraction of target pixels inside patch q.
  double outcome(int q) const;

  /// Number of query locations whose outcome exceeds the threshold.
  int discoverable(double threshold = 0.0) const;

  double total_target_pixels() const { return target_mask.sum(); }
};

struct Feedback {
  int query_index = -1;
  Field patch_values;
  double outcome = 0.0;
};

/// Revealed pixels of one task. Immutable once built; query() returns a new set.
class ObservationSet {
 public:
  ObservationSet() = default;
  explicit ObservationSet(const GridShape& grid);

  const GridShape& grid() const { return grid_; }
  /// Revealed content, zero where unrevealed.
  const Field& values() const { return values_; }
  const Field& mask() const { return mask_; }
  const std::vector<int>& queried() const { return queried_; }
  const std::vector<bool>& visited() const { return visited_; }
  bool is_visited(int q) const { return visited_.at(static_cast<std::size_t>(q)); }
  bool empty() const { return queried_.empty(); }
  std::size_t size() const { return queried_.size(); }

 private:
  friend std::pair<Feedback, ObservationSet> query(const SearchTask&, const ObservationSet&, int);

  GridShape grid_;
  Field values_;
  Field mask_;
  std::vector<int> queried_;
  std::vector<bool> visited_;
};

/// Validates and assembles a task. Throws on shape mismatch, out-of-range
/// content, non-binary mask, or a budget outside [1, N].
SearchTask make_task(Field content, Field target_mask, const GridShape& grid, int budget);

/// Reveals patch q. Throws DuplicateQuery, BudgetExhausted, or InvalidArgument
/// for an index outside [0, N).
std::pair<Feedback, ObservationSet> query(const SearchTask& task, const ObservationSet& obs, int q);

/// One run's term: sum of outcomes / min(B, U), clamped to [0, 1] (0 when U = 0).
double run_success(std::span<const double> outcomes, int budget, int discoverable);

/// Budget-normalised cumulative discovery, averaged over tasks:
///   SR = 1/L * sum_i [ 1 / min(B_i, U_i) * sum_t y_i(q_t) ],
/// where U_i counts query locations with outcome above `discoverable_threshold`.
/// Each run's term is clamped to [0, 1]. `outcomes[i]` is the outcome stream of
/// the run on `tasks[i]`.
double success_rate(std::span<const std::vector<double>> outcomes, std::span<const SearchTask> tasks,
                    double discoverable_threshold = 0.0);

}  // namespace atd
