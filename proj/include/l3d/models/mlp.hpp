#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "l3d/numkit/param_set.hpp"
#include "l3d/numkit/rng.hpp"
#include "l3d/numkit/tensor.hpp"

namespace l3d::models {

using numkit::ParamSet;
using numkit::Tensor;

enum class Activation { Identity, Relu, Gelu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

double activate(Activation a, double z);
double activate_derivative(Activation a, double z);

/// Fully connected network. Layer l maps layer_dims[l] -> layer_dims[l+1]
/// as z = a W^T + b, followed by activations[l]. Weights are stored
/// [out x in]; parameters are named "<layer_names[l]>.weight" and
/// "<layer_names[l]>.bias".
struct MlpSpec {
  std::vector<std::size_t> layer_dims;
  std::vector<Activation> activations;
  std::vector<bool> bias;
  std::vector<std::string> layer_names;

  std::size_t n_layers() const { return activations.size(); }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }

  void validate() const;

  std::string weight_name(std::size_t layer) const { return layer_names[layer] + ".weight"; }
  std::string bias_name(std::size_t layer) const { return layer_names[layer] + ".bias"; }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Toy model of superposition family: untied encoder (no bias, identity)
/// into `hidden`, decoder with bias and ReLU on the output.
MlpSpec superposition_spec(std::size_t n_in, std::size_t hidden, std::size_t n_out);

/// Deep GeLU network: `hidden_layers` GeLU layers of width `hidden`, then a
/// linear output layer. Every layer has a bias.
MlpSpec deep_gelu_spec(std::size_t n_in, std::size_t hidden, std::size_t hidden_layers, std::size_t n_out);

enum class InitScheme {
  FanIn,  // weights and biases Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
  Tied,   // two-layer models with n_out <= n_in: encoder as FanIn, decoder row o = encoder column o, zero biases
};

std::string_view to_string(InitScheme s);
InitScheme parse_init_scheme(std::string_view s);

ParamSet init_params(const MlpSpec& spec, numkit::Rng& rng, InitScheme scheme = InitScheme::FanIn);

/// Parameter tensors are present with the shapes the spec implies.
void check_params(const MlpSpec& spec, const ParamSet& params);

struct ForwardCache {
  std::vector<Tensor> inputs;  // input to each layer (post-activation of the previous one)
  std::vector<Tensor> pre;     // pre-activation of each layer
};

/// Batched forward pass. X is [n_s x n_in]; returns [n_s x n_out].
Tensor forward(const MlpSpec& spec, const ParamSet& params, const Tensor& x, ForwardCache* cache = nullptr);

/// Single-sample forward.
std::vector<double> forward_one(const MlpSpec& spec, const ParamSet& params, std::span<const double> x);

/// Parameter gradient of sum_s <d_out[s], f(x_s)> given the cache of the
/// matching forward pass.
ParamSet backward(const MlpSpec& spec, const ParamSet& params, const ForwardCache& cache, const Tensor& d_out);

/// Directional derivative d/dδ f(x, W + δ·direction) at δ = 0 for one sample.
std::vector<double> jvp_in_direction(const MlpSpec& spec, const ParamSet& params, std::span<const double> x,
                                     const ParamSet& direction);

}  // namespace l3d::models
