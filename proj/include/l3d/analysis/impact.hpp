#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "l3d/decomp/basis.hpp"
#include "l3d/models/divergence.hpp"
#include "l3d/models/mlp.hpp"
#include "l3d/numkit/rng.hpp"

namespace l3d::analysis {

using numkit::ParamSet;
using numkit::Tensor;

/// |V_in ∇_W D(f(x, W), y_ref)| per subnetwork.
std::vector<double> impact(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                           std::span<const double> x, std::span<const double> y_ref,
                           models::Divergence divergence = models::Divergence::Mse);

/// Mean of impact over the rows of `refs` ([n_refs x n_o]).
std::vector<double> mean_impact(const models::MlpSpec& spec, const ParamSet& params,
                                const decomp::SubnetworkBasis& basis, std::span<const double> x, const Tensor& refs,
                                models::Divergence divergence = models::Divergence::Mse);

struct ImpactTable {
  Tensor values;  // [n_samples x n_v]
  std::size_t n_refs = 0;
};

/// Mean impact of every subnetwork on every row of `x`. Each sample gets
/// n_refs reference outputs f(x_r) with r drawn uniformly from the other
/// rows of `x`.
ImpactTable impact_table(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                         const Tensor& x, std::size_t n_refs, numkit::Rng& rng,
                         models::Divergence divergence = models::Divergence::Mse, std::size_t threads = 1);

/// Per subnetwork, the top_n sample indices by mean impact, highest first;
/// equal impacts keep ascending sample order.
std::vector<std::vector<std::size_t>> top_samples(const ImpactTable& table, std::size_t top_n);

std::vector<std::vector<std::size_t>> top_samples(const models::MlpSpec& spec, const ParamSet& params,
                                                  const decomp::SubnetworkBasis& basis, const Tensor& x,
                                                  std::size_t n_refs, std::size_t top_n, numkit::Rng& rng,
                                                  models::Divergence divergence = models::Divergence::Mse,
                                                  std::size_t threads = 1);

/// Output indices ordered by |d f(x) / d delta| along the out direction of
/// subnetwork k, largest first, truncated to top_n.
std::vector<std::size_t> most_affected_outputs(const models::MlpSpec& spec, const ParamSet& params,
                                               const decomp::SubnetworkBasis& basis, std::span<const double> x,
                                               std::size_t k, std::size_t top_n);

}  // namespace l3d::analysis
