// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "epsnet/nn/layers.hpp"

namespace epsnet::nn {

struct AdamConfig {
  double learning_rate = 0.0075;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter list, in the list's order.
struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  AdamState() = default;
  AdamState(AdamConfig cfg, const ParamList& params);
};

/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  p -= lr * mhat / (sqrt(vhat) + eps)
void adam_step(AdamState& state, const ParamList& params);

}  // namespace epsnet::nn
