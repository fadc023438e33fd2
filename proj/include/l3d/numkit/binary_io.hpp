#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "l3d/error.hpp"
#include "l3d/numkit/tensor.hpp"

namespace l3d::numkit {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

/// Little-endian writer for the checkpoint and basis containers.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);

  void magic(std::string_view tag);
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s);
  void shape(const Shape& s);
  /// Shape followed by row-major data.
  void tensor(const Tensor& t);
  void close();

 private:
  void raw(const void* p, std::size_t n);

  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Shape shape();
  Tensor tensor();
  /// Reads raw doubles into an already-shaped tensor.
  void fill(Tensor& t);
  void expect_end();

 private:
  void raw(void* p, std::size_t n);

  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace l3d::numkit
