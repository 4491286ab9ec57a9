#include "atd/domain.hpp"

#include <algorithm>
#include <string>

namespace atd {

void GridShape::validate() const {
  require(height > 0 && width > 0, "grid dimensions must be positive");
  require(patch_h > 0 && patch_w > 0, "patch dimensions must be positive");
  require(height % patch_h == 0 && width % patch_w == 0,
          "patch " + std::to_string(patch_h) + "x" + std::to_string(patch_w) + " does not tile grid " +
              std::to_string(height) + "x" + std::to_string(width));
}

std::vector<Index> GridShape::patch_pixels(int q) const {
  require(q >= 0 && q < candidates(), "query index " + std::to_string(q) + " out of range");
  const int pr = q / patch_cols();
  const int pc = q % patch_cols();
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(patch_area()));
  for (int dr = 0; dr < patch_h; ++dr)
    for (int dc = 0; dc < patch_w; ++dc)
      out.push_back(static_cast<Index>(pr * patch_h + dr) * width + (pc * patch_w + dc));
  return out;
}

Field GridShape::gather(const Field& field, int q) const {
  const auto pixels = patch_pixels(q);
  Field out(static_cast<Index>(pixels.size()));
  for (std::size_t k = 0; k < pixels.size(); ++k) out[static_cast<Index>(k)] = field[pixels[k]];
  return out;
}

double SearchTask::outcome(int q) const { return grid.gather(target_mask, q).mean(); }

int SearchTask::discoverable(double threshold) const {
  int count = 0;
  for (int q = 0; q < grid.candidates(); ++q)
    if (outcome(q) > threshold) ++count;
  return count;
}

ObservationSet::ObservationSet(const GridShape& grid)
    : grid_(grid),
      values_(Field::Zero(grid.pixels())),
      mask_(Field::Zero(grid.pixels())),
      visited_(static_cast<std::size_t>(grid.candidates()), false) {}

SearchTask make_task(Field content, Field target_mask, const GridShape& grid, int budget) {
  grid.validate();
  const Index n = grid.pixels();
  require(content.size() == n, "content has " + std::to_string(content.size()) + " cells, grid needs " +
                                   std::to_string(n));
  require(target_mask.size() == n, "target_mask has " + std::to_string(target_mask.size()) +
                                       " cells, grid needs " + std::to_string(n));
  require(content.allFinite() && (content >= 0.0).all() && (content <= 1.0).all(),
          "content values must lie in [0, 1]");
  require(((target_mask == 0.0) || (target_mask == 1.0)).all(), "target_mask must be binary");
  require(budget >= 1, "budget must be at least 1");
  require(budget <= grid.candidates(), "budget " + std::to_string(budget) + " exceeds " +
                                           std::to_string(grid.candidates()) + " query locations");
  return SearchTask{grid, std::move(content), std::move(target_mask), budget};
}

std::pair<Feedback, ObservationSet> query(const SearchTask& task, const ObservationSet& obs, int q) {
  if (q < 0 || q >= task.grid.candidates())
    throw InvalidArgument("query index " + std::to_string(q) + " out of range [0, " +
                          std::to_string(task.grid.candidates()) + ")");
  require(obs.grid() == task.grid, "observation set belongs to a different grid");
  if (obs.is_visited(q)) throw DuplicateQuery("location " + std::to_string(q) + " already queried");
  if (static_cast<int>(obs.size()) >= task.budget)
    throw BudgetExhausted("budget of " + std::to_string(task.budget) + " queries exhausted");

  ObservationSet next = obs;
  for (Index p : task.grid.patch_pixels(q)) {
    next.values_[p] = task.content[p];
    next.mask_[p] = 1.0;
  }
  next.queried_.push_back(q);
  next.visited_[static_cast<std::size_t>(q)] = true;

  Feedback fb{q, task.grid.gather(task.content, q), task.outcome(q)};
  return {std::move(fb), std::move(next)};
}

double run_success(std::span<const double> outcomes, int budget, int discoverable) {
  const int reachable = std::min(budget, discoverable);
  double found = 0.0;
  for (double y : outcomes) found += y;
  const double rate = reachable > 0 ? found / reachable : 0.0;
  return std::clamp(rate, 0.0, 1.0);
}

double success_rate(std::span<const std::vector<double>> outcomes, std::span<const SearchTask> tasks,
                    double discoverable_threshold) {
  require(!outcomes.empty(), "success_rate: no runs");
  require(outcomes.size() == tasks.size(), "success_rate: one task per run required");
  double total = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& run = outcomes[i];
    const auto& task = tasks[i];
    require(static_cast<int>(run.size()) <= task.budget, "run exceeds its task budget");
    total += run_success(run, task.budget, task.discoverable(discoverable_threshold));
  }
  return total / static_cast<double>(outcomes.size());
}

}  // namespace atd
