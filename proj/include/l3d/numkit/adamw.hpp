#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "l3d/numkit/param_set.hpp"
#include "l3d/numkit/tensor.hpp"

namespace l3d::numkit {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// One tensor handed to the optimizer: the value to update and its gradient.
struct ParamSlot {
  std::string_view name;
  Tensor* value;
  const Tensor* grad;
};

/// AdamW with decoupled weight decay:
///   p <- p - lr*wd*p
///   m <- b1*m + (1-b1)*g,  v <- b2*v + (1-b2)*g^2
///   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
///
/// Moments are allocated on the first step and tied to slot order; later
/// steps must present the same slots with the same shapes.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {});

  void step(std::span<const ParamSlot> slots);
  void step(ParamSet& params, const ParamSet& grads);

  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  const AdamWConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }

  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamWConfig config_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace l3d::numkit
