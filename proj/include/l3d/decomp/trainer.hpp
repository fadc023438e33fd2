#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "l3d/decomp/basis.hpp"
#include "l3d/decomp/sparse_recon.hpp"
#include "l3d/models/divergence.hpp"
#include "l3d/models/mlp.hpp"

namespace l3d::decomp {

struct DecompositionConfig {
  std::size_t n_v = 5;
  std::size_t rank = 1;
  /// Per parameter tensor rank overrides; empty means `rank` everywhere.
  std::vector<std::size_t> tensor_ranks;
  double top_k = 0.1;
  std::size_t epochs = 1000;
  std::size_t batch = 32;
  double lr = 0.01;
  double lr_decay = 0.8;
  /// Epochs between learning-rate decays; 0 disables decay.
  std::size_t lr_decay_period = 100;
  std::uint64_t seed = 0;
  std::size_t n_data = 1000;
  models::Divergence divergence = models::Divergence::Mse;
  std::size_t threads = 1;

  void validate() const;
  std::vector<std::size_t> ranks_for(std::size_t n_tensors) const;
};

struct TrainStats {
  std::vector<double> epoch_loss;     // mean per-sample loss of each epoch
  std::vector<double> epoch_lr;       // learning rate used during each epoch
  std::vector<double> epoch_seconds;  // wall clock, not part of any deterministic output
  std::vector<double> p_act;          // final epoch
  std::vector<std::size_t> final_usage;
  std::size_t final_samples = 0;

  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

struct DecompositionResult {
  SubnetworkBasis basis;
  TrainStats stats;
};

/// Called after each epoch with (epoch index, mean loss, learning rate).
using DecompositionCallback = std::function<void(std::size_t, double, double)>;

/// Per-sample divergence gradients at the fixed model parameters for the
/// given (sample, reference) index pairs; returns [n x n_w].
Tensor divergence_gradients(const models::MlpSpec& spec, const ParamSet& params, const Tensor& inputs,
                            const Tensor& outputs, const std::vector<std::size_t>& samples,
                            const std::vector<std::size_t>& references, models::Divergence divergence,
                            std::size_t threads);

/// Learns V_in / V_out for a trained model.
///
/// Each epoch reshuffles `inputs`; for each minibatch every sample is paired
/// with another sample of the same minibatch, its divergence gradient against
/// that sample's output is computed at the fixed parameters, projected,
/// top-k masked, reconstructed, and the basis takes one AdamW step followed
/// by normalize_out. The learning rate is multiplied by lr_decay every
/// lr_decay_period epochs. A trailing partial minibatch is used only if it
/// has at least two samples and keeps at least one coefficient.
DecompositionResult train_l3d(const models::MlpSpec& spec, const ParamSet& params, const Tensor& inputs,
                              const DecompositionConfig& config, numkit::Rng& rng,
                              const DecompositionCallback& on_epoch = {});

/// Same, seeded from config.seed.
DecompositionResult train_l3d(const models::MlpSpec& spec, const ParamSet& params, const Tensor& inputs,
                              const DecompositionConfig& config, const DecompositionCallback& on_epoch = {});

struct EvaluationResult {
  double mean_loss = 0.0;
  std::vector<double> p_act;
};

/// One pass over `inputs` in the same minibatch scheme as training, without
/// updating the basis.
EvaluationResult evaluate_basis(const models::MlpSpec& spec, const ParamSet& params, const SubnetworkBasis& basis,
                                const Tensor& inputs, const DecompositionConfig& config, numkit::Rng& rng);

}  // namespace l3d::decomp
