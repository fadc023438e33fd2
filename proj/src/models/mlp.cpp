#include "l3d/models/mlp.hpp"

#include <cmath>
#include <numbers>

#include "l3d/error.hpp"
#include "l3d/numkit/linalg.hpp"

namespace l3d::models {

using numkit::Shape;

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Gelu: return "gelu";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "gelu") return Activation::Gelu;
  throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Gelu: return 0.5 * z * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0));
  }
  return z;
}

double activate_derivative(Activation a, double z) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * z * z) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + z * pdf;
    }
  }
  return 1.0;
}

void MlpSpec::validate() const {
  if (activations.empty()) throw InvalidArgument("MlpSpec: at least one layer required");
  if (layer_dims.size() != activations.size() + 1) {
    throw InvalidArgument("MlpSpec: " + std::to_string(layer_dims.size()) + " extents for " +
                          std::to_string(activations.size()) + " layers");
  }
  if (bias.size() != activations.size() || layer_names.size() != activations.size()) {
    throw InvalidArgument("MlpSpec: bias flags and layer names must have one entry per layer");
  }
  for (auto d : layer_dims) {
    if (d == 0) throw InvalidArgument("MlpSpec: layer extents must be >= 1");
  }
  for (std::size_t i = 0; i < layer_names.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (layer_names[i] == layer_names[j]) throw InvalidArgument("MlpSpec: duplicate layer name " + layer_names[i]);
    }
  }
}

MlpSpec superposition_spec(std::size_t n_in, std::size_t hidden, std::size_t n_out) {
  MlpSpec spec{{n_in, hidden, n_out}, {Activation::Identity, Activation::Relu}, {false, true}, {"enc", "dec"}};
  spec.validate();
  return spec;
}

MlpSpec deep_gelu_spec(std::size_t n_in, std::size_t hidden, std::size_t hidden_layers, std::size_t n_out) {
  MlpSpec spec;
  spec.layer_dims.push_back(n_in);
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    spec.layer_dims.push_back(hidden);
    spec.activations.push_back(Activation::Gelu);
  }
  spec.layer_dims.push_back(n_out);
  spec.activations.push_back(Activation::Identity);
  for (std::size_t l = 0; l < spec.activations.size(); ++l) {
    spec.bias.push_back(true);
    spec.layer_names.push_back("layers." + std::to_string(l));
  }
  spec.validate();
  return spec;
}

std::string_view to_string(InitScheme s) { return s == InitScheme::Tied ? "tied" : "fan_in"; }

InitScheme parse_init_scheme(std::string_view s) {
  if (s == "fan_in") return InitScheme::FanIn;
  if (s == "tied") return InitScheme::Tied;
  throw InvalidArgument("unknown init scheme '" + std::string(s) + "' (expected fan_in or tied)");
}

ParamSet init_params(const MlpSpec& spec, numkit::Rng& rng, InitScheme scheme) {
  spec.validate();
  if (scheme == InitScheme::Tied) {
    if (spec.n_layers() != 2 || spec.layer_dims[2] > spec.layer_dims[0]) {
      throw InvalidArgument("tied init needs a two-layer model with n_out <= n_in");
    }
    const std::size_t in = spec.layer_dims[0], hidden = spec.layer_dims[1], out = spec.layer_dims[2];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const Tensor enc = numkit::uniform(rng, -bound, bound, {hidden, in});
    Tensor dec({out, hidden});
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t h = 0; h < hidden; ++h) dec(o, h) = enc(h, o);
    }
    ParamSet params;
    params.add(spec.weight_name(0), enc);
    if (spec.bias[0]) params.add(spec.bias_name(0), Tensor({hidden}));
    params.add(spec.weight_name(1), dec);
    if (spec.bias[1]) params.add(spec.bias_name(1), Tensor({out}));
    return params;
  }
  ParamSet params;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const std::size_t in = spec.layer_dims[l], out = spec.layer_dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    params.add(spec.weight_name(l), numkit::uniform(rng, -bound, bound, {out, in}));
    if (spec.bias[l]) params.add(spec.bias_name(l), numkit::uniform(rng, -bound, bound, {out}));
  }
  return params;
}

void check_params(const MlpSpec& spec, const ParamSet& params) {
  spec.validate();
  std::size_t expected = 0;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const Shape w_shape{spec.layer_dims[l + 1], spec.layer_dims[l]};
    if (params.at(spec.weight_name(l)).shape() != w_shape) {
      throw InvalidArgument("parameter " + spec.weight_name(l) + " has shape " +
                            numkit::shape_string(params.at(spec.weight_name(l)).shape()) + ", expected " +
                            numkit::shape_string(w_shape));
    }
    ++expected;
    if (spec.bias[l]) {
      if (params.at(spec.bias_name(l)).shape() != Shape{spec.layer_dims[l + 1]}) {
        throw InvalidArgument("parameter " + spec.bias_name(l) + " has the wrong shape");
      }
      ++expected;
    }
  }
  if (params.size() != expected) throw InvalidArgument("parameter set has unexpected extra tensors");
}

Tensor forward(const MlpSpec& spec, const ParamSet& params, const Tensor& x, ForwardCache* cache) {
  if (x.rank() != 2 || x.extent(1) != spec.input_dim()) {
    throw InvalidArgument("forward: input shape " + numkit::shape_string(x.shape()) + " does not match n_in=" +
                          std::to_string(spec.input_dim()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Tensor a = x;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    Tensor z = numkit::matmul_nt(a, params.at(spec.weight_name(l)));
    if (spec.bias[l]) {
      const auto b = params.at(spec.bias_name(l)).data();
      for (std::size_t s = 0; s < z.extent(0); ++s) {
        auto row = z.row(s);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
      }
    }
    Tensor out = z;
    if (spec.activations[l] != Activation::Identity) {
      for (double& v : out.data()) v = activate(spec.activations[l], v);
    }
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(std::move(z));
    }
    a = std::move(out);
  }
  return a;
}

std::vector<double> forward_one(const MlpSpec& spec, const ParamSet& params, std::span<const double> x) {
  Tensor in({1, x.size()}, std::vector<double>(x.begin(), x.end()));
  return forward(spec, params, in).values();
}

ParamSet backward(const MlpSpec& spec, const ParamSet& params, const ForwardCache& cache, const Tensor& d_out) {
  if (cache.pre.size() != spec.n_layers()) throw InvalidArgument("backward: cache does not match spec");
  if (d_out.shape() != cache.pre.back().shape()) throw InvalidArgument("backward: output gradient shape mismatch");
  ParamSet grads = params.zeros_like();
  Tensor delta = d_out;
  for (std::size_t l = spec.n_layers(); l-- > 0;) {
    const Tensor& z = cache.pre[l];
    if (spec.activations[l] != Activation::Identity) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= activate_derivative(spec.activations[l], z[i]);
    }
    grads.at(spec.weight_name(l)) = numkit::matmul_tn(delta, cache.inputs[l]);
    if (spec.bias[l]) {
      auto gb = grads.at(spec.bias_name(l)).data();
      for (std::size_t s = 0; s < delta.extent(0); ++s) {
        const auto row = delta.row(s);
        for (std::size_t j = 0; j < row.size(); ++j) gb[j] += row[j];
      }
    }
    if (l > 0) delta = numkit::matmul(delta, params.at(spec.weight_name(l)));
  }
  return grads;
}

std::vector<double> jvp_in_direction(const MlpSpec& spec, const ParamSet& params, std::span<const double> x,
                                     const ParamSet& direction) {
  params.require_same_layout(direction, "jvp_in_direction");
  if (x.size() != spec.input_dim()) throw InvalidArgument("jvp_in_direction: input length mismatch");
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> da(x.size(), 0.0);
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const Tensor& w = params.at(spec.weight_name(l));
    const Tensor& dw = direction.at(spec.weight_name(l));
    const std::size_t out = w.extent(0), in = w.extent(1);
    std::vector<double> z(out, 0.0), dz(out, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      double zi = 0.0, dzi = 0.0;
      for (std::size_t j = 0; j < in; ++j) {
        zi += w(i, j) * a[j];
        dzi += dw(i, j) * a[j] + w(i, j) * da[j];
      }
      if (spec.bias[l]) {
        zi += params.at(spec.bias_name(l))[i];
        dzi += direction.at(spec.bias_name(l))[i];
      }
      z[i] = zi;
      dz[i] = dzi;
    }
    a.assign(out, 0.0);
    da.assign(out, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      a[i] = activate(spec.activations[l], z[i]);
      da[i] = activate_derivative(spec.activations[l], z[i]) * dz[i];
    }
  }
  return da;
}

}  // namespace l3d::models
