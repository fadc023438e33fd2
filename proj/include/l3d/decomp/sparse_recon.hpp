#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "l3d/decomp/basis.hpp"

namespace l3d::decomp {

inline constexpr double kLossEpsilon = 1e-12;

/// Selection over an [n_s x n_v] coefficient grid.
struct TopKMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> selected;  // row-major, 1 = kept
  double threshold = 0.0;              // smallest selected magnitude

  bool operator()(std::size_t r, std::size_t c) const { return selected[r * cols + c] != 0; }
  std::size_t count() const;

  static TopKMask all(std::size_t rows, std::size_t cols);
  static TopKMask none(std::size_t rows, std::size_t cols);
};

/// floor(k * n_s * n_v), the number of coefficients batch_topk keeps.
std::size_t topk_count(std::size_t n_s, std::size_t n_v, double k);

/// Keeps the floor(k * n_s * n_v) largest |coefficients| across the whole
/// batch. Entries strictly above the cut magnitude tau are kept; ties at tau
/// are filled in increasing flat index until the count is reached. Throws
/// InvalidArgument when k is outside (0, 1] or the count is zero.
TopKMask batch_topk(const Tensor& coeffs, double k);

/// [n_s x n_w] reconstruction: row s = sum_k mask(s,k) coeffs(s,k) out_k.
Tensor reconstruct(const SubnetworkBasis& basis, const Tensor& coeffs, const TopKMask& mask);

/// Per-sample ||g - g_hat|| / (||g|| + eps).
std::vector<double> recon_loss_per_sample(const Tensor& grads, const Tensor& grads_hat);

/// Batch mean of recon_loss_per_sample.
double recon_loss(const Tensor& grads, const Tensor& grads_hat);

struct BasisGradients {
  double loss = 0.0;
  std::vector<double> sample_loss;
  Tensor coeffs;  // [n_s x n_v]
  TopKMask mask;
  std::vector<std::vector<TuckerTensor>> in;   // [k][i], same structure as the basis
  std::vector<std::vector<TuckerTensor>> out;  // [k][i]
};

/// Exact gradient of the batch reconstruction loss with respect to every
/// core and factor, with the top-k mask held constant. `grads` is
/// [n_s x n_w], one flattened divergence gradient per row.
BasisGradients loss_gradients(const SubnetworkBasis& basis, const Tensor& grads, double k);
BasisGradients loss_gradients(const SubnetworkBasis& basis, const Tensor& grads, const TopKMask& mask);

/// Loss only, for a fixed mask (used by finite-difference checks).
double masked_loss(const SubnetworkBasis& basis, const Tensor& grads, const TopKMask& mask);

/// For each i in [0, n), a uniform reference index r != i. Requires n >= 2.
std::vector<std::size_t> pair_references(numkit::Rng& rng, std::size_t n);

/// Per-subnetwork fraction of samples whose mask row selected it.
std::vector<double> compute_pact(const std::vector<std::size_t>& usage_counts, std::size_t n_samples);

/// Adds each column's selected count to `usage`.
void accumulate_usage(const TopKMask& mask, std::vector<std::size_t>& usage);

}  // namespace l3d::decomp
