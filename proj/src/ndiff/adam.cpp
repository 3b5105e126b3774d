#include "motionguide/ndiff/adam.hpp"

#include <cmath>

#include "motionguide/errors.hpp"

namespace mg::nd {

void adam_step(AdamState& state, ParameterSet& params) {
  for (const auto& [name, p] : params) {
    if (p.grad.shape() != p.value.shape()) {
      throw structural_error("adam: gradient for '" + name + "' has shape " + shape_string(p.grad.shape()) +
                             ", parameter has " + shape_string(p.value.shape()));
    }
    if (!p.grad.all_finite()) throw numerical_error("adam: non-finite gradient in parameter '" + name + "'");
  }

  const AdamConfig& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (auto& [name, p] : params) {
    Tensor& m = state.first_moment[name];
    Tensor& v = state.second_moment[name];
    if (m.shape() != p.value.shape()) m = Tensor(p.value.shape());
    if (v.shape() != p.value.shape()) v = Tensor(p.value.shape());
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace mg::nd
