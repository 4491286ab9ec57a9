#include "atd/rng.hpp"

namespace atd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream, std::uint64_t sub) {
  std::uint64_t h = splitmix64(root);
  h = splitmix64(h ^ (stream * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (sub * 0x8cb92ba72f3d8dd7ULL));
  return h;
}

Index Rng::uniform_index(Index n) {
  require(n > 0, "uniform_index: empty range");
  std::uniform_int_distribution<Index> dist(0, n - 1);
  return dist(engine_);
}

Field Rng::normal_field(Index n) {
  Field out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal();
  return out;
}

FieldBatch Rng::normal_batch(Index rows, Index cols) {
  FieldBatch out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = normal();
  return out;
}

}  // namespace atd
