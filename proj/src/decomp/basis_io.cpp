#include "l3d/decomp/basis_io.hpp"

#include "l3d/numkit/binary_io.hpp"

namespace l3d::decomp {

namespace {

constexpr std::string_view kMagic = "L3DBASIS";

void write_block(numkit::BinaryWriter& w, const TuckerTensor& t) {
  w.u32(static_cast<std::uint32_t>(t.order()));
  for (auto r : t.ranks()) w.u64(r);
  for (double v : t.core.data()) w.f64(v);
  for (const auto& f : t.factors) {
    for (double v : f.data()) w.f64(v);
  }
}

TuckerTensor read_block(numkit::BinaryReader& r, const Shape& target, const std::filesystem::path& path) {
  const auto order = r.u32();
  if (order != target.size()) throw IoError(path.string() + ": block order does not match its tensor");
  std::vector<std::size_t> ranks(order);
  for (std::size_t n = 0; n < order; ++n) {
    ranks[n] = static_cast<std::size_t>(r.u64());
    if (ranks[n] < 1 || ranks[n] > target[n]) throw IoError(path.string() + ": block rank out of range");
  }
  TuckerTensor t = TuckerTensor::zeros(target, ranks);
  r.fill(t.core);
  for (auto& f : t.factors) r.fill(f);
  return t;
}

}  // namespace

void save_basis(const std::filesystem::path& path, const SubnetworkBasis& basis) {
  numkit::BinaryWriter w(path);
  w.magic(kMagic);
  w.u32(kBasisVersion);
  w.u64(basis.n_v());
  w.u32(static_cast<std::uint32_t>(basis.n_tensors()));
  for (const auto& b : basis.layout()) {
    w.str(b.name);
    w.shape(b.shape);
  }
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    for (std::size_t i = 0; i < basis.n_tensors(); ++i) write_block(w, basis.in_block(k, i));
  }
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    for (std::size_t i = 0; i < basis.n_tensors(); ++i) write_block(w, basis.out_block(k, i));
  }
  w.close();
}

SubnetworkBasis load_basis(const std::filesystem::path& path) {
  numkit::BinaryReader r(path);
  r.expect_magic(kMagic);
  const auto version = r.u32();
  if (version != kBasisVersion) {
    throw IoError(path.string() + ": unsupported basis version " + std::to_string(version));
  }
  const auto n_v = static_cast<std::size_t>(r.u64());
  const auto n_tensors = r.u32();
  if (n_v == 0 || n_v > 100000) throw IoError(path.string() + ": implausible subnetwork count");
  std::vector<BlockLayout> layout;
  std::size_t offset = 0;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    BlockLayout b;
    b.name = r.str();
    b.shape = r.shape();
    b.offset = offset;
    b.size = numkit::shape_size(b.shape);
    offset += b.size;
    layout.push_back(std::move(b));
  }
  std::vector<std::vector<TuckerTensor>> in(n_v), out(n_v);
  for (auto* side : {&in, &out}) {
    for (std::size_t k = 0; k < n_v; ++k) {
      for (std::size_t i = 0; i < layout.size(); ++i) (*side)[k].push_back(read_block(r, layout[i].shape, path));
    }
  }
  r.expect_end();
  try {
    return SubnetworkBasis(std::move(layout), std::move(in), std::move(out));
  } catch (const InvalidArgument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace l3d::decomp
