#pragma once

#include <cstdint>
#include <filesystem>

#include "l3d/decomp/basis.hpp"

namespace l3d::decomp {

/// SubnetworkBasis container, little-endian:
///   "L3DBASIS"  u32 version  u64 n_v  u32 n_tensors
///   per tensor: u32 name_len, name bytes, u32 order, u64 extents[order]
///   then for side in (in, out), k in [0, n_v), tensor i:
///     u32 order, u64 ranks[order], f64 core[prod(ranks)],
///     f64 factor_n[extent_n * rank_n] for each mode n (row-major)
inline constexpr std::uint32_t kBasisVersion = 1;

void save_basis(const std::filesystem::path& path, const SubnetworkBasis& basis);

/// Throws IoError on a bad magic, unknown version, or malformed content.
SubnetworkBasis load_basis(const std::filesystem::path& path);

}  // namespace l3d::decomp
