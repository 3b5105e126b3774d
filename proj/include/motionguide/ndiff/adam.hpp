#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "motionguide/ndiff/tensor.hpp"

namespace mg::nd {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates keyed by parameter name. Moments start at zero and are
/// created lazily on the first step that sees a parameter.
struct AdamState {
  AdamConfig config;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  std::uint64_t step = 0;

  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}
};

/// One bias-corrected Adam update of every parameter from its gradient.
/// A non-finite gradient aborts the step before any parameter changes and
/// raises a numerical error naming the parameter.
void adam_step(AdamState& state, ParameterSet& params);

}  // namespace mg::nd
