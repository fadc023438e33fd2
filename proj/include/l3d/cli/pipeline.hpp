#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "l3d/analysis/alignment.hpp"
#include "l3d/analysis/impact.hpp"
#include "l3d/analysis/matching.hpp"
#include "l3d/cli/config.hpp"
#include "l3d/decomp/trainer.hpp"
#include "l3d/models/train.hpp"

namespace l3d::cli {

using numkit::ParamSet;
using numkit::Tensor;

// Each step draws only from its own stream of the experiment seed, so any
// step can be rerun alone and reproduce the bytes of a full pipeline run.

models::Dataset generate_dataset(const ExperimentConfig& config);

/// Throws NumericalError if training diverges.
models::ToyTrainResult train_model(const ExperimentConfig& config, const models::Dataset& data,
                                   const models::EpochCallback& on_epoch = {});

/// The l3d.n_data fresh task inputs the decomposition is trained on.
Tensor decomposition_inputs(const ExperimentConfig& config);

decomp::DecompositionResult decompose(const ExperimentConfig& config, const ParamSet& params, std::size_t threads,
                                      const decomp::DecompositionCallback& on_epoch = {});

std::vector<bool> dead_mask(const std::vector<double>& p_act);

/// Impact-based assignment of subnetworks to feature groups.
struct FeatureMatching {
  Tensor scores;      // [n_v x n_groups] mean impact
  Tensor normalized;  // rows scaled to sum 1
  analysis::Assignment assignment;
  /// Assigned group if it is also the group the subnetwork's impact peaks
  /// on; a subnetwork forced onto a group it barely touches is a duplicate
  /// of another one and is left unmatched here.
  std::vector<std::optional<std::size_t>> matched;

  std::size_t n_matched() const;
  /// Number of groups with a matched subnetwork.
  std::size_t groups_covered() const;
};

FeatureMatching match_features(const ExperimentConfig& config, const ParamSet& params,
                               const decomp::SubnetworkBasis& basis, const std::vector<double>& p_act,
                               std::size_t threads);

struct AlignmentTables {
  analysis::AlignmentView view;
  Tensor abs_cosine;  // [n_v x n_in]
};

struct EvalReport {
  double loss = 0.0;           // one pass over eval.n_data fresh inputs
  std::vector<double> p_act;   // of that pass
  FeatureMatching matching;
  std::vector<AlignmentTables> alignment;         // superposition tasks with n_out >= n_in
  std::optional<analysis::CoefficientEstimate> coefficients;  // tasks with a mixing matrix
  std::optional<analysis::CoefficientFit> fit;
  analysis::ImpactTable impacts;                   // over the eval inputs
  std::vector<std::vector<std::size_t>> top;      // per subnetwork, eval.top_n sample indices
  Tensor eval_inputs;
};

/// `train_p_act` is the final-epoch P_act of the decomposition; it decides
/// which subnetworks count as dead.
EvalReport evaluate(const ExperimentConfig& config, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                    const std::vector<double>& train_p_act, std::size_t threads);

/// The intervene.n_inputs fresh task inputs interventions are measured on.
Tensor intervention_inputs(const ExperimentConfig& config);

struct SelectivityRow {
  std::size_t subnetwork = 0;
  std::size_t output = 0;  // the matched feature index, read as an output index
  double delta = 0.0;
  double ratio = 0.0;
};

/// Selectivity at -selectivity_delta and +selectivity_delta of every matched
/// subnetwork. Only meaningful where feature i drives output i (tms, square).
std::vector<SelectivityRow> selectivity(const ExperimentConfig& config, const ParamSet& params,
                                        const decomp::SubnetworkBasis& basis, const FeatureMatching& matching,
                                        const Tensor& x, std::size_t threads);

}  // namespace l3d::cli
