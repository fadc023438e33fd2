#pragma once

#include <functional>
#include <span>
#include <vector>

#include "l3d/numkit/tensor.hpp"

namespace l3d::numkit {

using ScalarFn = std::function<double(const Tensor&)>;

/// Central-difference gradient of f at x. Coordinate j is stepped by
/// h_j = rel_step * max(1, |x_j|). Throws NumericalError if f is non-finite
/// at any probed point.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double rel_step = 1e-5);

/// ||a - b|| / max(||a||, ||b||), or 0 when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace l3d::numkit
