#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "l3d/decomp/basis.hpp"
#include "l3d/models/mlp.hpp"

namespace l3d::analysis {

using numkit::ParamSet;
using numkit::Tensor;

/// f(X, W0 + delta * out direction k). `params` is not modified.
Tensor intervene(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                 std::size_t k, double delta, const Tensor& x);

/// Several subnetworks moved at once; each move is (subnetwork, delta).
Tensor intervene(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                 const std::vector<std::pair<std::size_t, double>>& moves, const Tensor& x);

struct InterventionResult {
  std::size_t subnetwork = 0;
  std::vector<double> deltas;
  std::vector<Tensor> changes;  // per delta, [n_s x n_o] of f(x, W0 + delta v) - f(x, W0)

  /// [n_deltas x n_o], mean over samples of |change|.
  Tensor mean_abs_change() const;
};

struct PairInterventionResult {
  std::size_t first = 0;
  std::size_t second = 0;
  std::vector<double> deltas_first;
  std::vector<double> deltas_second;
  std::vector<Tensor> changes;  // row-major over (delta_first, delta_second), each [n_s x n_o]

  const Tensor& at(std::size_t i, std::size_t j) const { return changes[i * deltas_second.size() + j]; }
  /// [n_first x n_second x n_o], mean over samples of |change|.
  Tensor mean_abs_change() const;
};

InterventionResult intervention_sweep(const models::MlpSpec& spec, const ParamSet& params,
                                      const decomp::SubnetworkBasis& basis, std::size_t k,
                                      const std::vector<double>& deltas, const Tensor& x, std::size_t threads = 1);

std::vector<InterventionResult> intervention_sweep(const models::MlpSpec& spec, const ParamSet& params,
                                                   const decomp::SubnetworkBasis& basis,
                                                   const std::vector<std::size_t>& subnetworks,
                                                   const std::vector<double>& deltas, const Tensor& x,
                                                   std::size_t threads = 1);

PairInterventionResult pair_sweep(const models::MlpSpec& spec, const ParamSet& params,
                                  const decomp::SubnetworkBasis& basis, std::size_t first, std::size_t second,
                                  const std::vector<double>& deltas_first, const std::vector<double>& deltas_second,
                                  const Tensor& x, std::size_t threads = 1);

/// `points` evenly spaced values over [lo, hi], endpoints included. Zero is
/// snapped to exactly 0.0 when it falls on the grid.
std::vector<double> delta_grid(double lo, double hi, std::size_t points);

/// Mean |change| on output `matched` divided by the mean over all other
/// outputs; `mean_change` is one row of mean_abs_change().
double selectivity_ratio(std::span<const double> mean_change, std::size_t matched);

}  // namespace l3d::analysis
