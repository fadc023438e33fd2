#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "l3d/models/mlp.hpp"
#include "l3d/models/toy_data.hpp"

namespace l3d::models {

struct ToyTrainConfig {
  std::size_t epochs = 1000;
  std::size_t batch = 32;
  double lr = 0.001;
  double weight_decay = 0.0;
  InitScheme init = InitScheme::FanIn;
};

struct ToyTrainResult {
  ParamSet params;
  std::vector<double> epoch_loss;  // mean MSE over each epoch's samples
};

/// Called after each epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Minibatch AdamW on the MSE between f(X) and the dataset targets. The data
/// order is reshuffled every epoch from `rng`. Parameters are initialized
/// from `rng` via init_params. Throws NumericalError if the loss becomes
/// non-finite.
ToyTrainResult train_toy(const MlpSpec& spec, const Dataset& data, const ToyTrainConfig& config, numkit::Rng& rng,
                         const EpochCallback& on_epoch = {});

/// Mean over samples of ||f(x) - y||^2 / n_o.
double mse_loss(const MlpSpec& spec, const ParamSet& params, const Dataset& data);

}  // namespace l3d::models
