// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epsnet/nn/layers.hpp"

namespace epsnet::nn {

/// Gated recurrent unit layer.
///
///   z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
///   r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
///   c_t = tanh(W_h x_t + U_h (r_t * h_{t-1}) + b_h)
///   h_t = (1 - z_t) * h_{t-1} + z_t * c_t
///
/// A sequence batch is an (inputs x steps*batch) matrix: step t occupies columns
/// [t*batch, (t+1)*batch). Outputs use the same layout with `hidden` rows.
class Gru {
 public:
  Gru() = default;
  Gru(Index inputs, Index hidden);

  void init(Rng& rng);

  /// h0 is hidden x batch.
  Matrix forward(const Matrix& sequence, Index steps, const Matrix& h0);
  /// `d_states` is the loss gradient w.r.t. every output state (zeros where unused).
  /// Accumulates parameter gradients and returns the gradient w.r.t. the input sequence.
  Matrix backward(const Matrix& d_states);
  /// Gradient w.r.t. h0 from the latest backward call.
  const Matrix& grad_h0() const { return grad_h0_; }

  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);

  Index inputs() const { return W_z.cols(); }
  Index hidden() const { return W_z.rows(); }

  Matrix W_z, W_r, W_h;  // hidden x inputs
  Matrix U_z, U_r, U_h;  // hidden x hidden
  Matrix b_z, b_r, b_h;  // hidden x 1
  Matrix gW_z, gW_r, gW_h;
  Matrix gU_z, gU_r, gU_h;
  Matrix gb_z, gb_r, gb_h;

 private:
  Index steps_ = 0;
  Index batch_ = 0;
  Matrix x_;       // inputs x T*B
  Matrix h_prev_;  // hidden x T*B, state entering each step
  Matrix z_, r_, c_;
  Matrix grad_h0_;
};

}  // namespace epsnet::nn
