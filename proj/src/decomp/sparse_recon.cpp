#include "l3d/decomp/sparse_recon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "l3d/error.hpp"
#include "l3d/numkit/linalg.hpp"

namespace l3d::decomp {

std::size_t TopKMask::count() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

TopKMask TopKMask::all(std::size_t rows, std::size_t cols) {
  return {rows, cols, std::vector<std::uint8_t>(rows * cols, 1), 0.0};
}

TopKMask TopKMask::none(std::size_t rows, std::size_t cols) {
  return {rows, cols, std::vector<std::uint8_t>(rows * cols, 0), 0.0};
}

std::size_t topk_count(std::size_t n_s, std::size_t n_v, double k) {
  // The small slack keeps e.g. 0.1 * 50 from flooring to 4.
  return static_cast<std::size_t>(std::floor(k * static_cast<double>(n_s * n_v) + 1e-9));
}

TopKMask batch_topk(const Tensor& coeffs, double k) {
  if (coeffs.rank() != 2) throw InvalidArgument("batch_topk: coefficients must be [n_s x n_v]");
  if (!(k > 0.0 && k <= 1.0)) throw InvalidArgument("batch_topk: k must lie in (0, 1]");
  const std::size_t n = coeffs.size();
  const std::size_t keep = topk_count(coeffs.extent(0), coeffs.extent(1), k);
  if (keep == 0) throw InvalidArgument("batch_topk: k * n_s * n_v < 1 selects nothing");

  TopKMask mask = TopKMask::none(coeffs.extent(0), coeffs.extent(1));
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(coeffs[i]);
  if (keep == n) {
    mask.selected.assign(n, 1);
    mask.threshold = *std::min_element(mags.begin(), mags.end());
    return mask;
  }

  std::vector<double> sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep - 1), sorted.end(),
                   std::greater<>());
  const double tau = sorted[keep - 1];
  std::size_t taken = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mags[i] > tau) {
      mask.selected[i] = 1;
      ++taken;
    }
  }
  for (std::size_t i = 0; i < n && taken < keep; ++i) {
    if (mags[i] == tau) {
      mask.selected[i] = 1;
      ++taken;
    }
  }
  mask.threshold = tau;
  return mask;
}

namespace {

Tensor masked(const Tensor& coeffs, const TopKMask& mask) {
  if (coeffs.rank() != 2 || coeffs.extent(0) != mask.rows || coeffs.extent(1) != mask.cols) {
    throw InvalidArgument("coefficient and mask shapes disagree");
  }
  Tensor out = coeffs;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.selected[i]) out[i] = 0.0;
  }
  return out;
}

}  // namespace

Tensor reconstruct(const SubnetworkBasis& basis, const Tensor& coeffs, const TopKMask& mask) {
  if (coeffs.extent(1) != basis.n_v()) throw InvalidArgument("reconstruct: coefficient width != n_v");
  return numkit::matmul(masked(coeffs, mask), basis.materialize_out());
}

std::vector<double> recon_loss_per_sample(const Tensor& grads, const Tensor& grads_hat) {
  if (grads.shape() != grads_hat.shape() || grads.rank() != 2) {
    throw InvalidArgument("recon_loss: gradient and reconstruction shapes disagree");
  }
  std::vector<double> out(grads.extent(0));
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto g = grads.row(s);
    const auto h = grads_hat.row(s);
    double rr = 0.0, gg = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      rr += (g[j] - h[j]) * (g[j] - h[j]);
      gg += g[j] * g[j];
    }
    out[s] = std::sqrt(rr) / (std::sqrt(gg) + kLossEpsilon);
  }
  return out;
}

double recon_loss(const Tensor& grads, const Tensor& grads_hat) {
  const auto per = recon_loss_per_sample(grads, grads_hat);
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

double masked_loss(const SubnetworkBasis& basis, const Tensor& grads, const TopKMask& mask) {
  const Tensor coeffs = numkit::matmul_nt(grads, basis.materialize_in());
  return recon_loss(grads, reconstruct(basis, coeffs, mask));
}

BasisGradients loss_gradients(const SubnetworkBasis& basis, const Tensor& grads, double k) {
  const Tensor coeffs = numkit::matmul_nt(grads, basis.materialize_in());
  return loss_gradients(basis, grads, batch_topk(coeffs, k));
}

BasisGradients loss_gradients(const SubnetworkBasis& basis, const Tensor& grads, const TopKMask& mask) {
  if (grads.rank() != 2 || grads.extent(1) != basis.n_params()) {
    throw InvalidArgument("loss_gradients: gradients must be [n_s x n_w]");
  }
  const std::size_t n_s = grads.extent(0);
  const Tensor v_in = basis.materialize_in();
  const Tensor v_out = basis.materialize_out();

  BasisGradients out;
  out.coeffs = numkit::matmul_nt(grads, v_in);
  out.mask = mask;
  const Tensor kept = masked(out.coeffs, mask);
  const Tensor recon = numkit::matmul(kept, v_out);

  // L = (1/n_s) sum_s ||r_s|| / (||g_s|| + eps), r_s = g_s - g_hat_s
  // dL/dg_hat_s = -(1/n_s) r_s / (||r_s|| (||g_s|| + eps))
  Tensor d_recon(recon.shape());
  out.sample_loss.resize(n_s);
  for (std::size_t s = 0; s < n_s; ++s) {
    const auto g = grads.row(s);
    const auto h = recon.row(s);
    double rr = 0.0, gg = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      rr += (g[j] - h[j]) * (g[j] - h[j]);
      gg += g[j] * g[j];
    }
    const double r_norm = std::sqrt(rr);
    const double denom = std::sqrt(gg) + kLossEpsilon;
    out.sample_loss[s] = r_norm / denom;
    if (r_norm > 0.0) {
      const double scale = -1.0 / (static_cast<double>(n_s) * r_norm * denom);
      auto d = d_recon.row(s);
      for (std::size_t j = 0; j < g.size(); ++j) d[j] = scale * (g[j] - h[j]);
    }
  }
  out.loss = std::accumulate(out.sample_loss.begin(), out.sample_loss.end(), 0.0) / static_cast<double>(n_s);
  if (!std::isfinite(out.loss)) throw NumericalError("loss_gradients: non-finite reconstruction loss");

  const Tensor d_vout = numkit::matmul_tn(kept, d_recon);     // [n_v x n_w]
  Tensor d_coeffs = numkit::matmul_nt(d_recon, v_out);        // [n_s x n_v]
  for (std::size_t i = 0; i < d_coeffs.size(); ++i) {
    if (!mask.selected[i]) d_coeffs[i] = 0.0;
  }
  const Tensor d_vin = numkit::matmul_tn(d_coeffs, grads);    // [n_v x n_w]

  const auto& layout = basis.layout();
  out.in.resize(basis.n_v());
  out.out.resize(basis.n_v());
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const auto slice = [&](const Tensor& dense) {
        const auto row = dense.row(k).subspan(layout[i].offset, layout[i].size);
        return Tensor(layout[i].shape, std::vector<double>(row.begin(), row.end()));
      };
      out.in[k].push_back(tucker_backward(basis.in_block(k, i), slice(d_vin)));
      out.out[k].push_back(tucker_backward(basis.out_block(k, i), slice(d_vout)));
    }
  }
  return out;
}

std::vector<std::size_t> pair_references(numkit::Rng& rng, std::size_t n) {
  if (n < 2) throw InvalidArgument("pair_references: batch must contain at least 2 samples");
  std::vector<std::size_t> refs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t u = rng.uniform_index(n - 1);
    refs[i] = u >= i ? u + 1 : u;
  }
  return refs;
}

void accumulate_usage(const TopKMask& mask, std::vector<std::size_t>& usage) {
  usage.resize(mask.cols, 0);
  for (std::size_t r = 0; r < mask.rows; ++r) {
    for (std::size_t c = 0; c < mask.cols; ++c) usage[c] += mask(r, c) ? 1 : 0;
  }
}

std::vector<double> compute_pact(const std::vector<std::size_t>& usage_counts, std::size_t n_samples) {
  std::vector<double> p(usage_counts.size(), 0.0);
  if (n_samples == 0) return p;
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = static_cast<double>(usage_counts[k]) / static_cast<double>(n_samples);
  }
  return p;
}

}  // namespace l3d::decomp
