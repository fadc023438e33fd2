#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "l3d/decomp/basis.hpp"
#include "l3d/models/mlp.hpp"

namespace l3d::analysis {

using numkit::ParamSet;
using numkit::Tensor;

/// Which subnetwork tensor slice is compared with which model tensor slice,
/// per input feature j. For a sample with only feature j active, the
/// decoder gradient row j is parallel to the embedding W_enc[:, j] and the
/// encoder gradient column j is parallel to the readout W_dec[j, :], so the
/// two coincide only when the model's encoder and decoder are transposes.
enum class AlignmentView {
  Embedding,      // subnetwork W_dec[j, :] vs model W_enc[:, j]
  EncoderColumn,  // subnetwork W_enc[:, j] vs model W_enc[:, j]
  Readout,        // subnetwork W_enc[:, j] vs model W_dec[j, :]
};

std::string_view to_string(AlignmentView v);

/// [n_v x n_in] of |cos| between the out-direction slices named by `view`.
/// Expects a superposition-family model (encoder [hidden x n_in], decoder
/// [n_out x hidden], n_out >= n_in); throws on a zero-norm slice.
Tensor cosine_alignment(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                        AlignmentView view = AlignmentView::Embedding);

struct CoefficientEstimate {
  std::vector<std::size_t> hidden;   // per subnetwork, the decoder column j* with the largest norm
  std::vector<std::size_t> feature;  // per subnetwork, the input feature its encoder row j* reads most
  Tensor a_hat;                      // [n_out x n_v], column k = traced path weights of subnetwork k
};

/// For each subnetwork k with encoder block E_k [hidden x n_in] and decoder
/// block D_k [n_out x hidden]: j* = argmax_j ||D_k[:, j]||,
/// f = argmax_i |E_k[j*, i]| and a_hat[i, k] = D_k[i, j*] * E_k[j*, f].
CoefficientEstimate extract_coefficients(const models::MlpSpec& spec, const decomp::SubnetworkBasis& basis);

struct CoefficientFit {
  std::vector<double> scale;  // least-squares scale per used subnetwork (0 for skipped ones)
  std::vector<bool> used;
  double r2 = 0.0;            // squared Pearson correlation over all used (scaled a_hat, A) pairs
  std::size_t n_points = 0;
};

/// Compares each used estimate column with A[:, feature[k]] after fitting
/// one scale per subnetwork. `live` (optional) excludes dead subnetworks.
CoefficientFit fit_coefficients(const CoefficientEstimate& est, const Tensor& mixing,
                                const std::vector<bool>& live = {});

/// Squared Pearson correlation; 0 when either side has zero variance.
double pearson_r2(std::span<const double> a, std::span<const double> b);

}  // namespace l3d::analysis
