#pragma once

#include <cstddef>

#include "l3d/numkit/tensor.hpp"

namespace l3d::numkit {

/// C = A B for A [m x k], B [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// C = A B^T for A [m x k], B [n x k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// C = A^T B for A [k x m], B [k x n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/// Mode-n product t x_n M with M of shape [J x I_n]. The extent of `mode`
/// becomes J, all other extents are unchanged.
Tensor n_mode_product(const Tensor& t, const Tensor& m, std::size_t mode);

/// Mode-n unfolding: [I_n x prod(other extents)], remaining modes in their
/// original order (row-major).
Tensor unfold(const Tensor& t, std::size_t mode);

/// Inverse of unfold for a tensor of the given shape.
Tensor fold(const Tensor& unfolded, std::size_t mode, const Shape& shape);

}  // namespace l3d::numkit
