#pragma once

#include <cstdint>
#include <filesystem>

#include "l3d/numkit/param_set.hpp"

namespace l3d::models {

/// ParamSet container, little-endian:
///   "L3DPARAM"  u32 version  u32 n_tensors
///   per tensor: u32 name_len, name bytes, u32 rank, u64 extents[rank],
///               f64 data[prod(extents)] row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_params(const std::filesystem::path& path, const numkit::ParamSet& params);

/// Throws IoError on a bad magic, unknown version, or truncated file.
numkit::ParamSet load_params(const std::filesystem::path& path);

}  // namespace l3d::models
