#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "l3d/numkit/rng.hpp"
#include "l3d/numkit/tensor.hpp"

namespace test {

using l3d::numkit::Tensor;

inline Tensor random_tensor(l3d::numkit::Rng& rng, const l3d::numkit::Shape& shape, double scale = 1.0) {
  return l3d::numkit::uniform(rng, -scale, scale, shape);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("l3d_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace test
