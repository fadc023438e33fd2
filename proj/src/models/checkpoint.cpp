#include "l3d/models/checkpoint.hpp"

#include "l3d/numkit/binary_io.hpp"

namespace l3d::models {

namespace {
constexpr std::string_view kMagic = "L3DPARAM";
}

void save_params(const std::filesystem::path& path, const numkit::ParamSet& params) {
  numkit::BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params) {
    w.str(t.name);
    w.tensor(t.value);
  }
  w.close();
}

numkit::ParamSet load_params(const std::filesystem::path& path) {
  numkit::BinaryReader r(path);
  r.expect_magic(kMagic);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto n = r.u32();
  numkit::ParamSet params;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = r.str();
    auto value = r.tensor();
    params.add(std::move(name), std::move(value));
  }
  r.expect_end();
  return params;
}

}  // namespace l3d::models
