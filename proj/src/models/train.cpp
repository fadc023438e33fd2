#include "l3d/models/train.hpp"

#include <cmath>
#include <string>

#include "l3d/error.hpp"
#include "l3d/numkit/adamw.hpp"

namespace l3d::models {

namespace {

Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
  const std::size_t cols = src.extent(1);
  Tensor out({end - begin, cols});
  for (std::size_t r = begin; r < end; ++r) {
    const auto row = src.row(order[r]);
    std::copy(row.begin(), row.end(), out.row(r - begin).begin());
  }
  return out;
}

}  // namespace

double mse_loss(const MlpSpec& spec, const ParamSet& params, const Dataset& data) {
  const Tensor y = forward(spec, params, data.inputs);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - data.targets[i]) * (y[i] - data.targets[i]);
  return s / static_cast<double>(y.size());
}

ToyTrainResult train_toy(const MlpSpec& spec, const Dataset& data, const ToyTrainConfig& config, numkit::Rng& rng,
                         const EpochCallback& on_epoch) {
  spec.validate();
  if (data.size() == 0) throw InvalidArgument("train_toy: empty dataset");
  if (data.inputs.extent(1) != spec.input_dim() || data.targets.extent(1) != spec.output_dim()) {
    throw InvalidArgument("train_toy: dataset dimensions do not match the model");
  }
  if (config.batch == 0) throw InvalidArgument("train_toy: batch size must be positive");

  ToyTrainResult result;
  result.params = init_params(spec, rng, config.init);
  numkit::AdamW opt({.lr = config.lr, .weight_decay = config.weight_decay});
  const std::size_t n = data.size();
  const double n_out = static_cast<double>(spec.output_dim());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = numkit::permutation(rng, n);
    double epoch_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch) {
      const std::size_t end = std::min(n, begin + config.batch);
      const Tensor x = gather_rows(data.inputs, order, begin, end);
      const Tensor t = gather_rows(data.targets, order, begin, end);
      ForwardCache cache;
      const Tensor y = forward(spec, result.params, x, &cache);
      Tensor d_out(y.shape());
      const double denom = static_cast<double>(end - begin) * n_out;
      double batch_sum = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - t[i];
        batch_sum += r * r;
        d_out[i] = 2.0 * r / denom;
      }
      if (!std::isfinite(batch_sum)) {
        throw NumericalError("train_toy: loss became non-finite at epoch " + std::to_string(epoch));
      }
      epoch_sum += batch_sum / n_out;
      const ParamSet grads = backward(spec, result.params, cache, d_out);
      opt.step(result.params, grads);
    }
    const double epoch_loss = epoch_sum / static_cast<double>(n);
    result.epoch_loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

}  // namespace l3d::models
