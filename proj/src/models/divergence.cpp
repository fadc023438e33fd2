#include "l3d/models/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "l3d/error.hpp"

namespace l3d::models {

namespace {

void require_equal_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidArgument(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError(std::string(what) + ": non-finite logit");
  }
}

// log-softmax of v.
std::vector<double> log_softmax(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  const double lse = m + std::log(s);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

}  // namespace

std::string_view to_string(Divergence d) { return d == Divergence::Mse ? "mse" : "kl"; }

Divergence parse_divergence(std::string_view s) {
  if (s == "mse") return Divergence::Mse;
  if (s == "kl") return Divergence::Kl;
  throw InvalidArgument("unknown divergence '" + std::string(s) + "'");
}

double divergence_mse(std::span<const double> y, std::span<const double> y_ref) {
  require_equal_length(y, y_ref, "divergence_mse");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_ref[i]) * (y[i] - y_ref[i]);
  return s / static_cast<double>(y.size());
}

double divergence_kl(std::span<const double> logits_p, std::span<const double> logits_q) {
  require_equal_length(logits_p, logits_q, "divergence_kl");
  require_finite(logits_p, "divergence_kl");
  require_finite(logits_q, "divergence_kl");
  const auto lp = log_softmax(logits_p);
  const auto lq = log_softmax(logits_q);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  return std::max(kl, 0.0);
}

double divergence(Divergence d, std::span<const double> y, std::span<const double> y_ref) {
  return d == Divergence::Mse ? divergence_mse(y, y_ref) : divergence_kl(y, y_ref);
}

void divergence_output_grad(Divergence d, std::span<const double> y, std::span<const double> y_ref,
                            std::span<double> out) {
  require_equal_length(y, y_ref, "divergence_output_grad");
  if (out.size() != y.size()) throw InvalidArgument("divergence_output_grad: output length mismatch");
  if (d == Divergence::Mse) {
    const double scale = 2.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = scale * (y[i] - y_ref[i]);
    return;
  }
  require_finite(y, "divergence_output_grad");
  require_finite(y_ref, "divergence_output_grad");
  // d/dp_i sum_j P_j (log P_j - log Q_j) = P_i (log P_i - log Q_i - KL)
  const auto lp = log_softmax(y);
  const auto lq = log_softmax(y_ref);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) kl += std::exp(lp[i]) * (lp[i] - lq[i]);
  for (std::size_t i = 0; i < lp.size(); ++i) out[i] = std::exp(lp[i]) * (lp[i] - lq[i] - kl);
}

ParamSet grad_divergence(const MlpSpec& spec, const ParamSet& params, std::span<const double> x,
                         std::span<const double> y_ref, Divergence d) {
  if (x.size() != spec.input_dim()) throw InvalidArgument("grad_divergence: input length mismatch");
  if (y_ref.size() != spec.output_dim()) throw InvalidArgument("grad_divergence: reference length mismatch");
  ForwardCache cache;
  const Tensor y = forward(spec, params, Tensor({1, x.size()}, std::vector<double>(x.begin(), x.end())), &cache);
  Tensor d_out(y.shape());
  divergence_output_grad(d, y.data(), y_ref, d_out.data());
  return backward(spec, params, cache, d_out);
}

std::vector<double> grad_divergence_flat(const MlpSpec& spec, const ParamSet& params, std::span<const double> x,
                                         std::span<const double> y_ref, Divergence d) {
  return grad_divergence(spec, params, x, y_ref, d).flatten();
}

}  // namespace l3d::models
