#include "strait/adam.h"

#include <cmath>
#include <stdexcept>

namespace strait {

void AdamStep(OptimizerState& state, std::span<double> params,
              std::span<const double> grads, std::span<const bool> active) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n ||
      (!active.empty() && active.size() != n)) {
    throw std::invalid_argument("adam: dimension mismatch");
  }
  const AdamConfig& c = state.config;
  state.t += 1;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < n; ++i) {
    if (!active.empty() && !active[i]) continue;
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= c.alpha * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace strait
