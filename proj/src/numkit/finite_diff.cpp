#include "l3d/numkit/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "l3d/error.hpp"

namespace l3d::numkit {

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double rel_step) {
  if (!(rel_step > 0.0)) throw InvalidArgument("finite_diff_grad: step must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x[j]));
    probe[j] = x[j] + h;
    const double fp = f(probe);
    probe[j] = x[j] - h;
    const double fm = f(probe);
    probe[j] = x[j];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericalError("finite_diff_grad: non-finite function value at coordinate " + std::to_string(j));
    }
    grad[j] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace l3d::numkit
