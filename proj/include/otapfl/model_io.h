#pragma once

// Self-describing binary checkpoint of a global model and the K personal
// models. Layout (little-endian):
//   magic   8 bytes  "OTAPFLM\0"
//   version u32      (currently 1)
//   d       u64
//   K       u64
//   round   i64
//   w       d x f64
//   v_k     K x d x f64
//
// Readers reject unknown magic, unknown versions and truncated payloads.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "otapfl/common.h"

namespace otapfl {

inline constexpr std::uint32_t kModelFileVersion = 1;

struct ModelCheckpoint {
  std::int64_t round = 0;
  ParamVector w;
  std::vector<ParamVector> v;
};

void save_models(const std::filesystem::path& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_models(const std::filesystem::path& path);

}  // namespace otapfl
