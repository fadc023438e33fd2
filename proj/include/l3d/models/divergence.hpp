#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "l3d/models/mlp.hpp"

namespace l3d::models {

enum class Divergence { Mse, Kl };

std::string_view to_string(Divergence d);
Divergence parse_divergence(std::string_view s);

/// ||y - y_ref||^2 / n_o.
double divergence_mse(std::span<const double> y, std::span<const double> y_ref);

/// KL(softmax(p) || softmax(q)) with log-sum-exp stabilization.
double divergence_kl(std::span<const double> logits_p, std::span<const double> logits_q);

double divergence(Divergence d, std::span<const double> y, std::span<const double> y_ref);

/// dD/dy, written into `out` (same length as y).
void divergence_output_grad(Divergence d, std::span<const double> y, std::span<const double> y_ref,
                            std::span<double> out);

/// Gradient of D(f(x, W), y_ref) with respect to every parameter tensor, at
/// the given parameters.
ParamSet grad_divergence(const MlpSpec& spec, const ParamSet& params, std::span<const double> x,
                         std::span<const double> y_ref, Divergence d);

/// Same as grad_divergence, flattened in ParamSet order.
std::vector<double> grad_divergence_flat(const MlpSpec& spec, const ParamSet& params, std::span<const double> x,
                                         std::span<const double> y_ref, Divergence d);

}  // namespace l3d::models
