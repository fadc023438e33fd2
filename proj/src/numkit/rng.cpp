#include "l3d/numkit/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "l3d/error.hpp"

namespace l3d::numkit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  if (!(lo < hi)) {
    throw InvalidArgument("uniform: require lo < hi, got [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
  const double v = lo + (hi - lo) * uniform01();
  // lo + (hi-lo)*u can round up to hi for u close to 1.
  return v < hi ? v : std::nextafter(hi, lo);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

Rng Rng::split(std::uint64_t stream) const { return Rng(splitmix64(seed_ ^ splitmix64(stream))); }

Tensor uniform(Rng& rng, double lo, double hi, const Shape& shape) {
  if (!(lo < hi)) {
    throw InvalidArgument("uniform: require lo < hi, got [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
  Tensor t(shape);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

std::vector<std::size_t> permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace l3d::numkit
