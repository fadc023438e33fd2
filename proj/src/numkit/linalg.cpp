#include "l3d/numkit/linalg.hpp"

#include <string>

#include "l3d/error.hpp"

namespace l3d::numkit {

namespace {

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw InvalidArgument(std::string(what) + ": expected a matrix, got shape " + shape_string(t.shape()));
  }
}

void require_inner(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": inner extents differ (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
  }
}

// Splits `shape` around `mode` into (prod before, extent, prod after).
struct ModeSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

ModeSplit split_at(const Shape& shape, std::size_t mode) {
  if (mode >= shape.size()) {
    throw InvalidArgument("mode " + std::to_string(mode) + " out of range for shape " + shape_string(shape));
  }
  ModeSplit s;
  for (std::size_t i = 0; i < mode; ++i) s.outer *= shape[i];
  s.extent = shape[mode];
  for (std::size_t i = mode + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  require_inner(k, b.extent(0), "matmul");
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = &c(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* bp = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(0);
  require_inner(k, b.extent(1), "matmul_nt");
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row(j).data();
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c(i, j) = s;
    }
  }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const std::size_t k = a.extent(0), m = a.extent(1), n = b.extent(1);
  require_inner(k, b.extent(0), "matmul_tn");
  Tensor c({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a.row(p).data();
    const double* bp = b.row(p).data();
    for (std::size_t i = 0; i < m; ++i) {
      const double api = ap[i];
      if (api == 0.0) continue;
      double* ci = &c(i, 0);
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor t({a.extent(1), a.extent(0)});
  for (std::size_t i = 0; i < a.extent(0); ++i) {
    for (std::size_t j = 0; j < a.extent(1); ++j) t(j, i) = a(i, j);
  }
  return t;
}

Tensor n_mode_product(const Tensor& t, const Tensor& m, std::size_t mode) {
  require_matrix(m, "n_mode_product");
  const ModeSplit s = split_at(t.shape(), mode);
  if (m.extent(1) != s.extent) {
    throw InvalidArgument("n_mode_product: factor has " + std::to_string(m.extent(1)) + " columns but mode " +
                          std::to_string(mode) + " has extent " + std::to_string(s.extent));
  }
  const std::size_t j_out = m.extent(0);
  Shape out_shape = t.shape();
  out_shape[mode] = j_out;
  Tensor out(out_shape);

  // out[o, j, q] = sum_i M[j, i] * t[o, i, q]
  const auto src = t.data();
  auto dst = out.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    const std::size_t src_base = o * s.extent * s.inner;
    const std::size_t dst_base = o * j_out * s.inner;
    for (std::size_t j = 0; j < j_out; ++j) {
      double* d = &dst[dst_base + j * s.inner];
      for (std::size_t i = 0; i < s.extent; ++i) {
        const double mji = m(j, i);
        if (mji == 0.0) continue;
        const double* x = &src[src_base + i * s.inner];
        for (std::size_t q = 0; q < s.inner; ++q) d[q] += mji * x[q];
      }
    }
  }
  return out;
}

Tensor unfold(const Tensor& t, std::size_t mode) {
  const ModeSplit s = split_at(t.shape(), mode);
  Tensor out({s.extent, s.outer * s.inner});
  const auto src = t.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.extent; ++i) {
      for (std::size_t q = 0; q < s.inner; ++q) {
        out(i, o * s.inner + q) = src[(o * s.extent + i) * s.inner + q];
      }
    }
  }
  return out;
}

Tensor fold(const Tensor& unfolded, std::size_t mode, const Shape& shape) {
  const ModeSplit s = split_at(shape, mode);
  if (unfolded.rank() != 2 || unfolded.extent(0) != s.extent || unfolded.extent(1) != s.outer * s.inner) {
    throw InvalidArgument("fold: unfolded shape " + shape_string(unfolded.shape()) + " incompatible with " +
                          shape_string(shape));
  }
  Tensor out(shape);
  auto dst = out.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.extent; ++i) {
      for (std::size_t q = 0; q < s.inner; ++q) {
        dst[(o * s.extent + i) * s.inner + q] = unfolded(i, o * s.inner + q);
      }
    }
  }
  return out;
}

}  // namespace l3d::numkit
