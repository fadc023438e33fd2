#include "l3d/cli/pipeline.hpp"

#include <algorithm>

#include "l3d/analysis/intervention.hpp"

namespace l3d::cli {

using models::TaskKind;

models::Dataset generate_dataset(const ExperimentConfig& config) {
  auto rng = stream(config, Stream::ToyData);
  return models::make_dataset(task_spec(config), rng, config.model_n_data);
}

models::ToyTrainResult train_model(const ExperimentConfig& config, const models::Dataset& data,
                                   const models::EpochCallback& on_epoch) {
  auto rng = stream(config, Stream::ToyTrain);
  return models::train_toy(model_spec(config), data, config.model, rng, on_epoch);
}

Tensor decomposition_inputs(const ExperimentConfig& config) {
  auto rng = stream(config, Stream::DecompData);
  return models::sample_inputs(task_spec(config), rng, config.l3d.n_data);
}

decomp::DecompositionResult decompose(const ExperimentConfig& config, const ParamSet& params, std::size_t threads,
                                      const decomp::DecompositionCallback& on_epoch) {
  auto dc = config.l3d;
  dc.threads = threads;
  dc.seed = config.seed;
  auto rng = stream(config, Stream::DecompTrain);
  return decomp::train_l3d(model_spec(config), params, decomposition_inputs(config), dc, rng, on_epoch);
}

std::vector<bool> dead_mask(const std::vector<double>& p_act) {
  std::vector<bool> dead(p_act.size());
  for (std::size_t k = 0; k < p_act.size(); ++k) dead[k] = p_act[k] == 0.0;
  return dead;
}

std::size_t FeatureMatching::n_matched() const {
  return static_cast<std::size_t>(std::count_if(matched.begin(), matched.end(), [](const auto& m) { return m.has_value(); }));
}

std::size_t FeatureMatching::groups_covered() const {
  std::vector<bool> covered(scores.extent(1), false);
  for (const auto& m : matched) {
    if (m) covered[*m] = true;
  }
  return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), true));
}

FeatureMatching match_features(const ExperimentConfig& config, const ParamSet& params,
                               const decomp::SubnetworkBasis& basis, const std::vector<double>& p_act,
                               std::size_t threads) {
  const auto task = task_spec(config);
  auto rng = stream(config, Stream::Eval);
  FeatureMatching m;
  m.scores = analysis::group_impact_scores(model_spec(config), params, basis, task, config.eval_n_probe,
                                           config.eval_n_refs, rng, config.l3d.divergence, threads);
  m.normalized = analysis::row_normalized(m.scores);
  m.assignment = analysis::match_subnetworks(m.normalized, 0.0, dead_mask(p_act));
  m.matched.resize(basis.n_v());
  const std::size_t n_groups = m.normalized.extent(1);
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    const auto& target = m.assignment.target[k];
    if (!target) continue;
    const auto row = m.normalized.row(k);
    const auto peak = static_cast<std::size_t>(std::max_element(row.begin(), row.begin() + n_groups) - row.begin());
    if (peak == *target) m.matched[k] = target;
  }
  return m;
}

EvalReport evaluate(const ExperimentConfig& config, const ParamSet& params, const decomp::SubnetworkBasis& basis,
                    const std::vector<double>& train_p_act, std::size_t threads) {
  const auto spec = model_spec(config);
  const auto task = task_spec(config);
  basis.require_compatible(params);
  if (train_p_act.size() != basis.n_v()) {
    throw InvalidArgument("evaluate: P_act has " + std::to_string(train_p_act.size()) + " entries for " +
                          std::to_string(basis.n_v()) + " subnetworks");
  }

  EvalReport report;
  report.matching = match_features(config, params, basis, train_p_act, threads);

  // A child of the eval stream, so the inputs do not depend on how many
  // probes the matching drew.
  auto rng = stream(config, Stream::Eval).split(1);
  report.eval_inputs = models::sample_inputs(task, rng, config.eval_n_data);
  auto dc = config.l3d;
  dc.threads = threads;
  const auto pass = decomp::evaluate_basis(spec, params, basis, report.eval_inputs, dc, rng);
  report.loss = pass.mean_loss;
  report.p_act = pass.p_act;

  if (config.task != TaskKind::Square && config.n_out >= config.n_in) {
    for (auto view : {analysis::AlignmentView::Embedding, analysis::AlignmentView::EncoderColumn,
                      analysis::AlignmentView::Readout}) {
      report.alignment.push_back({view, analysis::cosine_alignment(spec, params, basis, view)});
    }
  }
  if (task.mixing) {
    std::vector<bool> live(basis.n_v());
    for (std::size_t k = 0; k < live.size(); ++k) live[k] = train_p_act[k] > 0.0;
    report.coefficients = analysis::extract_coefficients(spec, basis);
    report.fit = analysis::fit_coefficients(*report.coefficients, *task.mixing, live);
  }
  report.impacts = analysis::impact_table(spec, params, basis, report.eval_inputs, config.eval_n_refs, rng,
                                          config.l3d.divergence, threads);
  report.top = analysis::top_samples(report.impacts, std::min(config.eval_top_n, config.eval_n_data));
  return report;
}

Tensor intervention_inputs(const ExperimentConfig& config) {
  auto rng = stream(config, Stream::Intervene);
  return models::sample_inputs(task_spec(config), rng, config.intervene_n_inputs);
}

std::vector<SelectivityRow> selectivity(const ExperimentConfig& config, const ParamSet& params,
                                        const decomp::SubnetworkBasis& basis, const FeatureMatching& matching,
                                        const Tensor& x, std::size_t threads) {
  const auto spec = model_spec(config);
  const std::vector<double> deltas = {-config.selectivity_delta, config.selectivity_delta};
  std::vector<SelectivityRow> rows;
  for (std::size_t k = 0; k < basis.n_v(); ++k) {
    const auto& target = matching.matched[k];
    if (!target) continue;
    if (*target >= spec.output_dim()) {
      throw InvalidArgument("selectivity: matched feature has no output of the same index");
    }
    const auto mean = analysis::intervention_sweep(spec, params, basis, k, deltas, x, threads).mean_abs_change();
    for (std::size_t d = 0; d < deltas.size(); ++d) {
      rows.push_back({k, *target, deltas[d], analysis::selectivity_ratio(mean.row(d), *target)});
    }
  }
  return rows;
}

}  // namespace l3d::cli
