#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sdc/nn/module.hpp"

namespace sdc::nn {

/// Named float tensors plus a key/value metadata block. Byte layout is
/// described in docs/checkpoint_format.md.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Appends every parameter under `prefix` + name.
void store_params(Checkpoint& ckpt, const ParamList<float>& params, const std::string& prefix = "");
/// Copies tensors into the parameters; throws IoError on a missing name
/// or a shape mismatch.
void restore_params(const Checkpoint& ckpt, const ParamList<float>& params, const std::string& prefix = "");

}  // namespace sdc::nn
