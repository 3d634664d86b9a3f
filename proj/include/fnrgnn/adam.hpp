#pragma once

#include "fnrgnn/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fnr {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled (AdamW-style); applied only to parameters marked for decay.
  double weight_decay = 0.0;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

struct ParamSlot {
  std::string name;
  Tensor* value;
  const Tensor* grad;
  bool decay = true;
};

// Zeroed moment buffers shaped like `params`.
AdamState make_adam_state(std::span<const ParamSlot> params, const AdamConfig& config);

// One Adam update with bias-corrected moments:
//   theta *= 1 - lr * wd                         (decay slots only)
//   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
//   theta -= lr * m_hat / (sqrt(v_hat) + eps)
// All gradients are checked before anything is modified; a non-finite entry
// throws std::domain_error naming the parameter.
void adam_step(std::span<const ParamSlot> params, AdamState& state);

}  // namespace fnr
