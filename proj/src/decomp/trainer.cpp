#include "l3d/decomp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "l3d/error.hpp"
#include "l3d/numkit/adamw.hpp"
#include "l3d/numkit/linalg.hpp"
#include "l3d/numkit/parallel.hpp"

namespace l3d::decomp {

void DecompositionConfig::validate() const {
  if (n_v == 0) throw InvalidArgument("decomposition: n_v must be positive");
  if (rank == 0) throw InvalidArgument("decomposition: rank must be positive");
  for (auto r : tensor_ranks) {
    if (r == 0) throw InvalidArgument("decomposition: tensor ranks must be positive");
  }
  if (!(top_k > 0.0 && top_k <= 1.0)) throw InvalidArgument("decomposition: top_k must lie in (0, 1]");
  if (batch < 2) throw InvalidArgument("decomposition: batch must hold at least 2 samples");
  if (topk_count(batch, n_v, top_k) < 1) {
    throw InvalidArgument("decomposition: top_k * batch * n_v < 1, no coefficient would survive masking");
  }
  if (!(lr > 0.0)) throw InvalidArgument("decomposition: lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("decomposition: lr_decay must lie in (0, 1]");
  if (n_data < 2) throw InvalidArgument("decomposition: n_data must be at least 2");
}

std::vector<std::size_t> DecompositionConfig::ranks_for(std::size_t n_tensors) const {
  if (tensor_ranks.empty()) return std::vector<std::size_t>(n_tensors, rank);
  if (tensor_ranks.size() != n_tensors) {
    throw InvalidArgument("decomposition: " + std::to_string(tensor_ranks.size()) + " tensor ranks given for " +
                          std::to_string(n_tensors) + " parameter tensors");
  }
  return tensor_ranks;
}

Tensor divergence_gradients(const models::MlpSpec& spec, const ParamSet& params, const Tensor& inputs,
                            const Tensor& outputs, const std::vector<std::size_t>& samples,
                            const std::vector<std::size_t>& references, models::Divergence divergence,
                            std::size_t threads) {
  if (samples.size() != references.size()) throw InvalidArgument("divergence_gradients: pairing size mismatch");
  Tensor grads({samples.size(), params.total_size()});
  numkit::parallel_for(samples.size(), threads, [&](std::size_t s) {
    const auto g = models::grad_divergence_flat(spec, params, inputs.row(samples[s]), outputs.row(references[s]),
                                                divergence);
    std::copy(g.begin(), g.end(), grads.row(s).begin());
  });
  return grads;
}

namespace {

struct Batch {
  std::vector<std::size_t> samples;
  std::vector<std::size_t> references;
};

// Splits a shuffled epoch into minibatches with in-batch reference pairing.
std::vector<Batch> plan_epoch(numkit::Rng& rng, std::size_t n, const DecompositionConfig& config) {
  const auto order = numkit::permutation(rng, n);
  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < n; begin += config.batch) {
    const std::size_t end = std::min(n, begin + config.batch);
    const std::size_t size = end - begin;
    if (size < 2 || topk_count(size, config.n_v, config.top_k) < 1) break;
    Batch b;
    b.samples.assign(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end));
    const auto local = pair_references(rng, size);
    for (auto r : local) b.references.push_back(b.samples[r]);
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<std::string> slot_names(const SubnetworkBasis& basis) {
  std::vector<std::string> names;
  for (const char* side : {"in", "out"}) {
    for (std::size_t k = 0; k < basis.n_v(); ++k) {
      for (std::size_t i = 0; i < basis.n_tensors(); ++i) {
        const std::string prefix = std::string(side) + "[" + std::to_string(k) + "]." + basis.layout()[i].name;
        names.push_back(prefix + ".core");
        for (std::size_t n = 0; n < basis.layout()[i].shape.size(); ++n) {
          names.push_back(prefix + ".factor" + std::to_string(n));
        }
      }
    }
  }
  return names;
}

std::vector<numkit::ParamSlot> make_slots(SubnetworkBasis& basis, const BasisGradients& grads,
                                          const std::vector<std::string>& names) {
  std::vector<numkit::ParamSlot> slots;
  std::size_t n = 0;
  for (int side = 0; side < 2; ++side) {
    for (std::size_t k = 0; k < basis.n_v(); ++k) {
      for (std::size_t i = 0; i < basis.n_tensors(); ++i) {
        TuckerTensor& block = side == 0 ? basis.in_block(k, i) : basis.out_block(k, i);
        const TuckerTensor& grad = side == 0 ? grads.in[k][i] : grads.out[k][i];
        slots.push_back({names[n++], &block.core, &grad.core});
        for (std::size_t m = 0; m < block.factors.size(); ++m) {
          slots.push_back({names[n++], &block.factors[m], &grad.factors[m]});
        }
      }
    }
  }
  return slots;
}

}  // namespace

DecompositionResult train_l3d(const models::MlpSpec& spec, const ParamSet& params, const Tensor& inputs,
                              const DecompositionConfig& config, numkit::Rng& rng,
                              const DecompositionCallback& on_epoch) {
  config.validate();
  models::check_params(spec, params);
  if (inputs.rank() != 2 || inputs.extent(1) != spec.input_dim()) {
    throw InvalidArgument("train_l3d: inputs do not match the model input width");
  }
  const std::size_t n = inputs.extent(0);
  if (n < 2) throw InvalidArgument("train_l3d: need at least two inputs");

  const Tensor outputs = models::forward(spec, params, inputs);
  DecompositionResult result;
  result.basis = SubnetworkBasis::random(params, config.n_v, config.ranks_for(params.size()), rng);
  normalize_out(result.basis);
  const auto names = slot_names(result.basis);

  numkit::AdamW opt({.lr = config.lr});
  auto& stats = result.stats;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.lr_decay_period > 0 && epoch > 0 && epoch % config.lr_decay_period == 0) {
      opt.set_lr(opt.lr() * config.lr_decay);
    }
    const auto start = std::chrono::steady_clock::now();
    const bool last = epoch + 1 == config.epochs;
    std::vector<std::size_t> usage(config.n_v, 0);
    std::size_t seen = 0;
    double loss_sum = 0.0;

    for (const auto& batch : plan_epoch(rng, n, config)) {
      const Tensor grads = divergence_gradients(spec, params, inputs, outputs, batch.samples, batch.references,
                                                config.divergence, config.threads);
      const BasisGradients bg = loss_gradients(result.basis, grads, config.top_k);
      loss_sum += bg.loss * static_cast<double>(batch.samples.size());
      seen += batch.samples.size();
      if (last) accumulate_usage(bg.mask, usage);
      opt.step(make_slots(result.basis, bg, names));
      normalize_out(result.basis);
    }

    const double epoch_loss = loss_sum / static_cast<double>(seen);
    if (!std::isfinite(epoch_loss)) {
      throw NumericalError("train_l3d: non-finite loss at epoch " + std::to_string(epoch));
    }
    stats.epoch_loss.push_back(epoch_loss);
    stats.epoch_lr.push_back(opt.lr());
    stats.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (last) {
      stats.final_usage = usage;
      stats.final_samples = seen;
      stats.p_act = compute_pact(usage, seen);
    }
    if (on_epoch) on_epoch(epoch, epoch_loss, opt.lr());
  }
  return result;
}

DecompositionResult train_l3d(const models::MlpSpec& spec, const ParamSet& params, const Tensor& inputs,
                              const DecompositionConfig& config, const DecompositionCallback& on_epoch) {
  numkit::Rng rng(config.seed);
  return train_l3d(spec, params, inputs, config, rng, on_epoch);
}

EvaluationResult evaluate_basis(const models::MlpSpec& spec, const ParamSet& params, const SubnetworkBasis& basis,
                                const Tensor& inputs, const DecompositionConfig& config, numkit::Rng& rng) {
  config.validate();
  models::check_params(spec, params);
  basis.require_compatible(params);
  const Tensor outputs = models::forward(spec, params, inputs);
  std::vector<std::size_t> usage(basis.n_v(), 0);
  std::size_t seen = 0;
  double loss_sum = 0.0;
  const Tensor v_in = basis.materialize_in();
  for (const auto& batch : plan_epoch(rng, inputs.extent(0), config)) {
    const Tensor grads = divergence_gradients(spec, params, inputs, outputs, batch.samples, batch.references,
                                              config.divergence, config.threads);
    const Tensor coeffs = numkit::matmul_nt(grads, v_in);
    const TopKMask mask = batch_topk(coeffs, config.top_k);
    loss_sum += recon_loss(grads, reconstruct(basis, coeffs, mask)) * static_cast<double>(batch.samples.size());
    seen += batch.samples.size();
    accumulate_usage(mask, usage);
  }
  if (seen == 0) throw InvalidArgument("evaluate_basis: no complete minibatch");
  return {loss_sum / static_cast<double>(seen), compute_pact(usage, seen)};
}

}  // namespace l3d::decomp
