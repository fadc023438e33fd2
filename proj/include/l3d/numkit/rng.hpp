#pragma once

#include <cstdint>
#include <random>

#include "l3d/numkit/tensor.hpp"

namespace l3d::numkit {

/// Seeded generator with a fixed, documented algorithm.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Floating-point and index draws are derived from raw 64-bit
/// outputs here rather than through <random> distributions (whose algorithms
/// are implementation-defined), so a seed reproduces the same values with any
/// conforming standard library.
///
/// uniform01: top 53 bits of one draw, scaled by 2^-53.
/// uniform_index(n): rejection sampling on one draw per attempt.
/// split(stream): child seeded from splitmix64(seed ^ splitmix64(stream)).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform01();

  /// Uniform in [lo, hi); throws InvalidArgument unless lo < hi.
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);

  bool bernoulli(double p) { return uniform01() < p; }

  /// Independent generator for a named sub-stream. Does not advance *this.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// i.i.d. Uniform[lo, hi) tensor.
Tensor uniform(Rng& rng, double lo, double hi, const Shape& shape);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

}  // namespace l3d::numkit
