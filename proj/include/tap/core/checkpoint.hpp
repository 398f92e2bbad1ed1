#pragma once

#include <filesystem>
#include <string>

#include "tap/core/param_store.hpp"

namespace tap::core {

// Binary layout, all integers little-endian:
//   "TAPC" | u32 version (1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | rank x u32 extents
//               | numel x f32 values
// Values are rounded to f32 on save and widened to f64 on load.

std::string encode_checkpoint(const ParamStore& params);
ParamStore decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace tap::core
