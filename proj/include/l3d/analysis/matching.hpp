#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "l3d/decomp/basis.hpp"
#include "l3d/models/divergence.hpp"
#include "l3d/models/mlp.hpp"
#include "l3d/models/toy_data.hpp"
#include "l3d/numkit/rng.hpp"

namespace l3d::analysis {

using numkit::ParamSet;
using numkit::Tensor;

struct Assignment {
  Tensor scores;                                // [n_v x n_targets], as given
  std::vector<std::optional<std::size_t>> target;  // per subnetwork; empty when dead or left over
  std::vector<bool> dead;
  double total = 0.0;                           // sum of matched scores

  /// Subnetwork matched to target t, if any.
  std::optional<std::size_t> subnetwork_for(std::size_t t) const;
  std::size_t n_matched() const;
};

/// Maximum-total-score injective matching of rows (subnetworks) to columns
/// (features or groups). Rows whose scores are all <= floor are marked dead
/// and left out, as are rows in `dead` when given. Hungarian method, O(n^3).
Assignment match_subnetworks(const Tensor& scores, double floor = 0.0, const std::vector<bool>& dead = {});

/// Assignment by exhaustive search over all injections; for testing.
double brute_force_best_total(const Tensor& scores);

/// Index sets of the input features that make up each feature group of the
/// task: singletons, or contiguous blocks of group_size for grouped tasks.
std::vector<std::vector<std::size_t>> feature_groups(const models::ToyTaskSpec& task);

/// [n_v x n_groups]: mean impact of each subnetwork over n_probe inputs in
/// which only group g is active (values Uniform over the task input range),
/// each against n_refs reference outputs of natural task samples.
Tensor group_impact_scores(const models::MlpSpec& spec, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                           const models::ToyTaskSpec& task, std::size_t n_probe, std::size_t n_refs,
                           numkit::Rng& rng, models::Divergence divergence = models::Divergence::Mse,
                           std::size_t threads = 1);

/// Each row divided by its sum (rows summing to 0 stay 0).
Tensor row_normalized(const Tensor& scores);

}  // namespace l3d::analysis
