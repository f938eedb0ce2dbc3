#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "blindsr/model.hpp"

namespace blindsr {

// Binary layout, all integers and doubles little-endian:
//   "BSRCKPT\0" | u32 version | u64 len + config JSON | i64 step
//   | u32 tensor count | per tensor: u32 name len, name, u32 ndim, u64 extents..., f64 data...
//   | u32 seed count | per seed: u32 name len, name, u64 value
struct Checkpoint {
  std::string config_json;
  std::int64_t step = 0;
  std::vector<NamedTensor> tensors;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;

  const Tensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Writes through a temporary file and renames, so a crash never leaves a torn checkpoint.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace blindsr
