#include "fnrgnn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fnr {

AdamState make_adam_state(std::span<const ParamSlot> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const auto& p : params) {
    state.m.emplace_back(p.value->rows(), p.value->cols());
    state.v.emplace_back(p.value->rows(), p.value->cols());
  }
  return state;
}

void adam_step(std::span<const ParamSlot> params, AdamState& state) {
  if (params.size() != state.m.size()) throw std::invalid_argument("adam_step: parameter count does not match state");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    require_same_shape(*p.value, *p.grad, ("adam_step[" + p.name + "]").c_str());
    require_same_shape(*p.value, state.m[k], ("adam_step[" + p.name + "]").c_str());
    if (!p.grad->all_finite()) throw std::domain_error("adam_step: non-finite gradient for parameter '" + p.name + "'");
  }

  const AdamConfig& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].value->data();
    const auto g = params[k].grad->data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    const double decay = params[k].decay ? 1.0 - c.lr * c.weight_decay : 1.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] = theta[i] * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace fnr
