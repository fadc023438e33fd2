#pragma once

#include <cstddef>
#include <vector>

#include "l3d/numkit/rng.hpp"
#include "l3d/numkit/tensor.hpp"

namespace l3d::decomp {

using numkit::Shape;
using numkit::Tensor;

/// Low-rank tensor G x_1 U1 x_2 U2 ... x_N UN.
///
/// core has shape [R_1 x ... x R_N]; factors[n] has shape [I_n x R_n], with
/// 1 <= R_n <= I_n. A vector (bias) is the N = 1 case: factor I x R, core R.
struct TuckerTensor {
  Shape target_shape;
  Tensor core;
  std::vector<Tensor> factors;

  /// ranks[n] is clamped to [1, target_shape[n]].
  static TuckerTensor zeros(const Shape& target_shape, const std::vector<std::size_t>& ranks);
  /// Core and factors i.i.d. Uniform[-scale, scale).
  static TuckerTensor random(const Shape& target_shape, const std::vector<std::size_t>& ranks, numkit::Rng& rng,
                             double scale);

  std::vector<std::size_t> ranks() const { return core.shape(); }
  std::size_t order() const { return target_shape.size(); }
  /// Number of stored scalars (core + factors).
  std::size_t n_components() const;

  void validate() const;

  /// Dense tensor of shape target_shape.
  Tensor materialize() const;

  /// Same structure with every component zeroed.
  TuckerTensor zeros_like() const;

  friend bool operator==(const TuckerTensor&, const TuckerTensor&) = default;
};

/// Inner product <materialize(t), g> computed as <G, g x_1 U1^T ... x_N UN^T>
/// without forming the dense block.
double tucker_inner(const TuckerTensor& t, const Tensor& g);

/// Gradient of <materialize(t), d_dense> with respect to the core and each
/// factor, returned in a TuckerTensor of the same structure:
///   dG   = dB x_1 U1^T ... x_N UN^T
///   dU_n = unfold_n(dB) unfold_n(G x_{m != n} U_m)^T
TuckerTensor tucker_backward(const TuckerTensor& t, const Tensor& d_dense);

/// Per-mode ranks min(rank, extent) for a target shape.
std::vector<std::size_t> clamp_ranks(const Shape& target_shape, std::size_t rank);

}  // namespace l3d::decomp
