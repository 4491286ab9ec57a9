#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "atd/nn.hpp"

namespace atd {

struct NamedTensor {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> data;  // row-major
};

/// Flat list of named parameter tensors plus tags. Serialised as a JSON
/// document with schema tag "atd.checkpoint/1":
///   { "schema", "role", "backend", "schedule_hash" (hex string),
///     "meta": {string: string}, "tensors": [{"name", "shape": [r, c], "data": [...]}] }
struct Checkpoint {
  std::string role;     // "permanent", "transient" or "reward"
  std::string backend;  // e.g. "analytic-gmm", "tiny-denoiser", "h-conv", "reward-mlp"
  std::uint64_t schedule_hash = 0;
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  const NamedTensor& tensor(const std::string& name) const;
  int meta_int(const std::string& key) const;
  double meta_double(const std::string& key) const;
};

inline constexpr const char* kCheckpointSchema = "atd.checkpoint/1";

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text);

/// Appends every slot of `params` as a named tensor.
template <class T>
void append_params(Checkpoint& ckpt, const nn::Params<T>& params) {
  for (std::size_t i = 0; i < params.layout().slots().size(); ++i) {
    const auto& slot = params.layout().slots()[i];
    NamedTensor t{slot.name, slot.rows, slot.cols, {}};
    t.data.reserve(static_cast<std::size_t>(slot.size()));
    for (Index k = 0; k < slot.size(); ++k) t.data.push_back(static_cast<double>(params.values()[slot.offset + k]));
    ckpt.tensors.push_back(std::move(t));
  }
}

/// Fills `params` from tensors with matching names and shapes; throws on mismatch.
template <class T>
void restore_params(const Checkpoint& ckpt, nn::Params<T>& params) {
  for (const auto& slot : params.layout().slots()) {
    const NamedTensor& t = ckpt.tensor(slot.name);
    require(t.rows == slot.rows && t.cols == slot.cols, "checkpoint tensor '" + slot.name + "' has wrong shape");
    for (Index k = 0; k < slot.size(); ++k)
      params.values()[slot.offset + k] = static_cast<T>(t.data[static_cast<std::size_t>(k)]);
  }
}

}  // namespace atd
