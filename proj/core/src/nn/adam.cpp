// SPDX-License-Identifier: Apache-2.0
#include "epsnet/nn/adam.hpp"

#include <cmath>

#include "epsnet/error.hpp"

namespace epsnet::nn {

AdamState::AdamState(AdamConfig cfg, const ParamList& params) : config(cfg) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    m.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
    v.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
  }
}

void adam_step(AdamState& s, const ParamList& params) {
  if (params.size() != s.m.size()) throw ShapeError("adam_step: parameter list does not match optimizer state");
  ++s.step;
  const auto& c = s.config;
  const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *params[i].grad;
    Matrix& p = *params[i].value;
    if (g.rows() != p.rows() || g.cols() != p.cols() || s.m[i].rows() != p.rows() || s.m[i].cols() != p.cols())
      throw ShapeError("adam_step: shape mismatch for " + params[i].name);
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g;
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.learning_rate * (s.m[i].array() / corr1) / ((s.v[i].array() / corr2).sqrt() + c.epsilon);
  }
}

}  // namespace epsnet::nn
