#pragma once

#include <cstdint>
#include <random>

#include "atd/types.hpp"

namespace atd {

/// Mixes a root seed with stream identifiers into an independent 64-bit seed.
/// Used to give every posterior chain, episode step and training call its own
/// substream so that results do not depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t sub = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [0, n).
  Index uniform_index(Index n);

  Field normal_field(Index n);
  FieldBatch normal_batch(Index rows, Index cols);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace atd
