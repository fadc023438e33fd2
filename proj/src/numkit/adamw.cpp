#include "l3d/numkit/adamw.hpp"

#include <cmath>
#include <string>

#include "l3d/error.hpp"

namespace l3d::numkit {

AdamW::AdamW(AdamWConfig config) : config_(config) {
  if (!(config_.lr >= 0.0) || !(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0) || !(config_.eps > 0.0) || !(config_.weight_decay >= 0.0)) {
    throw InvalidArgument("AdamW: invalid hyperparameters");
  }
}

void AdamW::step(std::span<const ParamSlot> slots) {
  if (!m_.empty() && m_.size() != slots.size()) {
    throw InvalidArgument("AdamW: slot count changed from " + std::to_string(m_.size()) + " to " +
                          std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (s.value->shape() != s.grad->shape()) {
      throw InvalidArgument("AdamW: gradient for '" + std::string(s.name) + "' has shape " +
                            shape_string(s.grad->shape()) + ", parameter has " + shape_string(s.value->shape()));
    }
    if (!m_.empty() && m_[i].shape() != s.value->shape()) {
      throw InvalidArgument("AdamW: parameter '" + std::string(s.name) + "' changed shape between steps");
    }
    if (!s.grad->all_finite()) {
      throw NumericalError("AdamW: non-finite gradient in '" + std::string(s.name) + "'");
    }
  }
  if (m_.empty()) {
    m_.reserve(slots.size());
    v_.reserve(slots.size());
    for (const auto& s : slots) {
      m_.emplace_back(s.value->shape());
      v_.emplace_back(s.value->shape());
    }
  }

  ++step_;
  const auto& c = config_;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_));
  const double decay = 1.0 - c.lr * c.weight_decay;

  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto p = slots[i].value->data();
    auto g = slots[i].grad->data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] *= decay;
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void AdamW::step(ParamSet& params, const ParamSet& grads) {
  params.require_same_layout(grads, "AdamW::step");
  std::vector<ParamSlot> slots;
  slots.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    slots.push_back({params[i].name, &params[i].value, &grads[i].value});
  }
  step(slots);
}

}  // namespace l3d::numkit
