#include "l3d/decomp/tucker.hpp"

#include <algorithm>
#include <string>

#include "l3d/error.hpp"
#include "l3d/numkit/linalg.hpp"

namespace l3d::decomp {

std::vector<std::size_t> clamp_ranks(const Shape& target_shape, std::size_t rank) {
  std::vector<std::size_t> ranks;
  for (auto e : target_shape) ranks.push_back(std::clamp<std::size_t>(rank, 1, e));
  return ranks;
}

TuckerTensor TuckerTensor::zeros(const Shape& target_shape, const std::vector<std::size_t>& ranks) {
  if (target_shape.empty() || ranks.size() != target_shape.size()) {
    throw InvalidArgument("TuckerTensor: need one rank per mode of " + numkit::shape_string(target_shape));
  }
  TuckerTensor t;
  t.target_shape = target_shape;
  Shape core_shape;
  for (std::size_t n = 0; n < ranks.size(); ++n) {
    const std::size_t r = std::clamp<std::size_t>(ranks[n], 1, target_shape[n]);
    core_shape.push_back(r);
    t.factors.emplace_back(Shape{target_shape[n], r});
  }
  t.core = Tensor(core_shape);
  return t;
}

TuckerTensor TuckerTensor::random(const Shape& target_shape, const std::vector<std::size_t>& ranks, numkit::Rng& rng,
                                  double scale) {
  TuckerTensor t = zeros(target_shape, ranks);
  for (double& v : t.core.data()) v = rng.uniform(-scale, scale);
  for (auto& f : t.factors) {
    for (double& v : f.data()) v = rng.uniform(-scale, scale);
  }
  return t;
}

std::size_t TuckerTensor::n_components() const {
  std::size_t n = core.size();
  for (const auto& f : factors) n += f.size();
  return n;
}

void TuckerTensor::validate() const {
  if (target_shape.empty()) throw InvalidArgument("TuckerTensor: empty target shape");
  if (core.rank() != target_shape.size() || factors.size() != target_shape.size()) {
    throw InvalidArgument("TuckerTensor: core/factor count does not match target order");
  }
  for (std::size_t n = 0; n < target_shape.size(); ++n) {
    const std::size_t r = core.extent(n);
    if (r < 1 || r > target_shape[n]) {
      throw InvalidArgument("TuckerTensor: rank " + std::to_string(r) + " out of range for mode " +
                            std::to_string(n) + " of " + numkit::shape_string(target_shape));
    }
    if (factors[n].shape() != Shape{target_shape[n], r}) {
      throw InvalidArgument("TuckerTensor: factor " + std::to_string(n) + " has shape " +
                            numkit::shape_string(factors[n].shape()));
    }
  }
}

Tensor TuckerTensor::materialize() const {
  Tensor out = core;
  for (std::size_t n = 0; n < factors.size(); ++n) out = numkit::n_mode_product(out, factors[n], n);
  return out;
}

TuckerTensor TuckerTensor::zeros_like() const { return zeros(target_shape, ranks()); }

double tucker_inner(const TuckerTensor& t, const Tensor& g) {
  if (g.shape() != t.target_shape) {
    throw InvalidArgument("tucker_inner: gradient shape " + numkit::shape_string(g.shape()) + " vs block " +
                          numkit::shape_string(t.target_shape));
  }
  Tensor reduced = g;
  for (std::size_t n = 0; n < t.factors.size(); ++n) {
    reduced = numkit::n_mode_product(reduced, numkit::transpose(t.factors[n]), n);
  }
  return numkit::dot(t.core, reduced);
}

TuckerTensor tucker_backward(const TuckerTensor& t, const Tensor& d_dense) {
  if (d_dense.shape() != t.target_shape) throw InvalidArgument("tucker_backward: gradient shape mismatch");
  TuckerTensor grad;
  grad.target_shape = t.target_shape;
  const std::size_t order = t.order();

  std::vector<Tensor> factors_t;
  factors_t.reserve(order);
  for (const auto& f : t.factors) factors_t.push_back(numkit::transpose(f));

  Tensor dg = d_dense;
  for (std::size_t n = 0; n < order; ++n) dg = numkit::n_mode_product(dg, factors_t[n], n);
  grad.core = std::move(dg);

  for (std::size_t n = 0; n < order; ++n) {
    Tensor partial = t.core;
    for (std::size_t m = 0; m < order; ++m) {
      if (m != n) partial = numkit::n_mode_product(partial, t.factors[m], m);
    }
    grad.factors.push_back(numkit::matmul_nt(numkit::unfold(d_dense, n), numkit::unfold(partial, n)));
  }
  return grad;
}

}  // namespace l3d::decomp
