#include "l3d/analysis/alignment.hpp"

#include <cmath>
#include <string>

#include "l3d/error.hpp"

namespace l3d::analysis {

namespace {

struct AutoencoderBlocks {
  std::size_t enc = 0;
  std::size_t dec = 0;
};

AutoencoderBlocks locate_blocks(const models::MlpSpec& spec, const decomp::SubnetworkBasis& basis) {
  if (spec.n_layers() != 2) throw InvalidArgument("expected a single-hidden-layer model (encoder + decoder)");
  AutoencoderBlocks b;
  bool have_enc = false, have_dec = false;
  for (std::size_t i = 0; i < basis.n_tensors(); ++i) {
    if (basis.layout()[i].name == spec.weight_name(0)) b.enc = i, have_enc = true;
    if (basis.layout()[i].name == spec.weight_name(1)) b.dec = i, have_dec = true;
  }
  if (!have_enc || !have_dec) throw InvalidArgument("basis has no encoder/decoder weight blocks");
  return b;
}

// Column `j` of a matrix.
std::vector<double> column(const Tensor& t, std::size_t j) {
  std::vector<double> v(t.extent(0));
  for (std::size_t r = 0; r < v.size(); ++r) v[r] = t(r, j);
  return v;
}

std::vector<double> row(const Tensor& t, std::size_t j) {
  const auto r = t.row(j);
  return {r.begin(), r.end()};
}

double abs_cosine(const std::vector<double>& sub, const std::vector<double>& model, const std::string& where) {
  const double ns = numkit::norm(sub), nm = numkit::norm(model);
  if (nm == 0.0) throw InvalidArgument("cosine_alignment: zero-norm model " + where);
  if (ns == 0.0) throw InvalidArgument("cosine_alignment: zero-norm subnetwork " + where);
  return std::min(1.0, std::abs(numkit::dot(sub, model)) / (ns * nm));
}

}  // namespace

std::string_view to_string(AlignmentView v) {
  switch (v) {
    case AlignmentView::Embedding: return "embedding";
    case AlignmentView::EncoderColumn: return "encoder_column";
    case AlignmentView::Readout: return "readout";
  }
  return "?";
}

Tensor cosine_alignment(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                        AlignmentView view) {
  models::check_params(spec, params);
  basis.require_compatible(params);
  const auto blocks = locate_blocks(spec, basis);
  const Tensor& w_enc = params.at(spec.weight_name(0));
  const Tensor& w_dec = params.at(spec.weight_name(1));
  const std::size_t n_in = w_enc.extent(1);
  if (w_dec.extent(0) < n_in) throw InvalidArgument("cosine_alignment: model has fewer outputs than inputs");
  Tensor cos({basis.n_v(), n_in});
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    const Tensor e_k = basis.out_block(k, blocks.enc).materialize();
    const Tensor d_k = basis.out_block(k, blocks.dec).materialize();
    for (std::size_t j = 0; j < n_in; ++j) {
      const std::string where = "slice for feature " + std::to_string(j) + " (subnetwork " + std::to_string(k) + ")";
      switch (view) {
        case AlignmentView::Embedding: cos(k, j) = abs_cosine(row(d_k, j), column(w_enc, j), where); break;
        case AlignmentView::EncoderColumn: cos(k, j) = abs_cosine(column(e_k, j), column(w_enc, j), where); break;
        case AlignmentView::Readout: cos(k, j) = abs_cosine(column(e_k, j), row(w_dec, j), where); break;
      }
    }
  }
  return cos;
}

CoefficientEstimate extract_coefficients(const models::MlpSpec& spec, const decomp::SubnetworkBasis& basis) {
  const auto blocks = locate_blocks(spec, basis);
  const std::size_t n_out = spec.output_dim(), hidden = spec.layer_dims[1], n_in = spec.input_dim();
  CoefficientEstimate est;
  est.a_hat = Tensor({n_out, basis.n_v()});
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    const Tensor e_k = basis.out_block(k, blocks.enc).materialize();  // [hidden x n_in]
    const Tensor d_k = basis.out_block(k, blocks.dec).materialize();  // [n_out x hidden]
    std::size_t j_star = 0;
    double best = -1.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      double sq = 0.0;
      for (std::size_t i = 0; i < n_out; ++i) sq += d_k(i, j) * d_k(i, j);
      if (sq > best) best = sq, j_star = j;
    }
    std::size_t f = 0;
    for (std::size_t i = 1; i < n_in; ++i) {
      if (std::abs(e_k(j_star, i)) > std::abs(e_k(j_star, f))) f = i;
    }
    for (std::size_t i = 0; i < n_out; ++i) est.a_hat(i, k) = d_k(i, j_star) * e_k(j_star, f);
    est.hidden.push_back(j_star);
    est.feature.push_back(f);
  }
  return est;
}

double pearson_r2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("pearson_r2: need two equal-length, non-empty series");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab * sab / (saa * sbb);
}

CoefficientFit fit_coefficients(const CoefficientEstimate& est, const Tensor& mixing, const std::vector<bool>& live) {
  const std::size_t n_v = est.a_hat.extent(1), n_out = est.a_hat.extent(0);
  if (mixing.rank() != 2 || mixing.extent(0) != n_out) {
    throw InvalidArgument("fit_coefficients: mixing matrix must be [n_out x n_in]");
  }
  if (!live.empty() && live.size() != n_v) throw InvalidArgument("fit_coefficients: live mask has wrong length");
  CoefficientFit fit;
  fit.scale.assign(n_v, 0.0);
  fit.used.assign(n_v, false);
  std::vector<double> fitted, truth;
  for (std::size_t k = 0; k < n_v; ++k) {
    if (!live.empty() && !live[k]) continue;
    if (est.feature[k] >= mixing.extent(1)) throw InvalidArgument("fit_coefficients: feature index out of range");
    double ha = 0.0, hh = 0.0;
    for (std::size_t i = 0; i < n_out; ++i) {
      ha += est.a_hat(i, k) * mixing(i, est.feature[k]);
      hh += est.a_hat(i, k) * est.a_hat(i, k);
    }
    if (hh == 0.0) continue;
    fit.scale[k] = ha / hh;
    fit.used[k] = true;
    for (std::size_t i = 0; i < n_out; ++i) {
      fitted.push_back(fit.scale[k] * est.a_hat(i, k));
      truth.push_back(mixing(i, est.feature[k]));
    }
  }
  fit.n_points = fitted.size();
  fit.r2 = fitted.empty() ? 0.0 : pearson_r2(fitted, truth);
  return fit;
}

}  // namespace l3d::analysis
