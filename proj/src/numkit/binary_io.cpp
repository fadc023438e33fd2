#include "l3d/numkit/binary_io.hpp"

#include <vector>

namespace l3d::numkit {

namespace {

constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

}  // namespace

BinaryWriter::BinaryWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
}

void BinaryWriter::raw(const void* p, std::size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed: " + path_.string());
}

void BinaryWriter::magic(std::string_view tag) { raw(tag.data(), tag.size()); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void BinaryWriter::shape(const Shape& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  for (auto e : s) u64(e);
}

void BinaryWriter::tensor(const Tensor& t) {
  shape(t.shape());
  raw(t.data().data(), t.size() * sizeof(double));
}

void BinaryWriter::close() {
  out_.flush();
  if (!out_) throw IoError("flush failed: " + path_.string());
  out_.close();
}

BinaryReader::BinaryReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open " + path.string() + " for reading");
}

void BinaryReader::raw(void* p, std::size_t n) {
  in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in_) throw IoError("unexpected end of file: " + path_.string());
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::string got(tag.size(), '\0');
  raw(got.data(), got.size());
  if (got != tag) throw IoError(path_.string() + ": bad magic, expected " + std::string(tag));
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::string BinaryReader::str() {
  const auto n = u32();
  if (n > (1u << 20)) throw IoError(path_.string() + ": implausible string length");
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

Shape BinaryReader::shape() {
  const auto rank = u32();
  if (rank == 0 || rank > 16) throw IoError(path_.string() + ": implausible tensor rank");
  Shape s(rank);
  std::uint64_t total = 1;
  for (auto& e : s) {
    const auto v = u64();
    if (v == 0 || v > kMaxElements) throw IoError(path_.string() + ": implausible tensor extent");
    e = static_cast<std::size_t>(v);
    total *= v;
    if (total > kMaxElements) throw IoError(path_.string() + ": tensor too large");
  }
  return s;
}

Tensor BinaryReader::tensor() {
  Tensor t(shape());
  fill(t);
  return t;
}

void BinaryReader::fill(Tensor& t) { raw(t.data().data(), t.size() * sizeof(double)); }

void BinaryReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) throw IoError(path_.string() + ": trailing bytes");
}

}  // namespace l3d::numkit
