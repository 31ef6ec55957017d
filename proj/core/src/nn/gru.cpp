// SPDX-License-Identifier: Apache-2.0
#include "epsnet/nn/gru.hpp"

#include "epsnet/error.hpp"

namespace epsnet::nn {

namespace {

void sigmoid_inplace(Eigen::Ref<Matrix> m) { m = (1.0 / (1.0 + (-m.array()).exp())).matrix(); }

}  // namespace

Gru::Gru(Index in, Index h)
    : W_z(Matrix::Zero(h, in)),
      W_r(Matrix::Zero(h, in)),
      W_h(Matrix::Zero(h, in)),
      U_z(Matrix::Zero(h, h)),
      U_r(Matrix::Zero(h, h)),
      U_h(Matrix::Zero(h, h)),
      b_z(Matrix::Zero(h, 1)),
      b_r(Matrix::Zero(h, 1)),
      b_h(Matrix::Zero(h, 1)) {
  zero_grad();
}

void Gru::init(Rng& rng) {
  for (Matrix* w : {&W_z, &W_r, &W_h}) glorot_uniform(*w, inputs(), hidden(), rng);
  for (Matrix* u : {&U_z, &U_r, &U_h}) glorot_uniform(*u, hidden(), hidden(), rng);
  for (Matrix* b : {&b_z, &b_r, &b_h}) b->setZero();
}

Matrix Gru::forward(const Matrix& seq, Index steps, const Matrix& h0) {
  if (steps <= 0 || seq.cols() % steps != 0) throw ShapeError("Gru: column count is not a multiple of steps");
  if (seq.rows() != inputs())
    throw ShapeError("Gru: expected " + std::to_string(inputs()) + " input rows, got " + std::to_string(seq.rows()));
  const Index B = seq.cols() / steps;
  if (h0.rows() != hidden() || h0.cols() != B) throw ShapeError("Gru: initial state shape mismatch");
  steps_ = steps;
  batch_ = B;
  x_ = seq;

  // Input projections for all steps at once.
  z_.noalias() = W_z * seq;
  r_.noalias() = W_r * seq;
  c_.noalias() = W_h * seq;
  z_.colwise() += b_z.col(0);
  r_.colwise() += b_r.col(0);
  c_.colwise() += b_h.col(0);

  h_prev_.resize(hidden(), steps * B);
  Matrix out(hidden(), steps * B);
  Matrix h = h0;
  Matrix rh(hidden(), B);
  for (Index t = 0; t < steps; ++t) {
    const Index c0 = t * B;
    h_prev_.middleCols(c0, B) = h;
    auto z = z_.middleCols(c0, B);
    auto r = r_.middleCols(c0, B);
    auto c = c_.middleCols(c0, B);
    z.noalias() += U_z * h;
    r.noalias() += U_r * h;
    sigmoid_inplace(z);
    sigmoid_inplace(r);
    rh = (r.array() * h.array()).matrix();
    c.noalias() += U_h * rh;
    c = c.array().tanh().matrix();
    h = (h.array() + z.array() * (c.array() - h.array())).matrix();
    out.middleCols(c0, B) = h;
  }
  return out;
}

Matrix Gru::backward(const Matrix& d_states) {
  const Index B = batch_;
  if (d_states.rows() != hidden() || d_states.cols() != steps_ * B) throw ShapeError("Gru: gradient shape mismatch");
  const Index H = hidden();
  Matrix da_z(H, steps_ * B), da_r(H, steps_ * B), da_h(H, steps_ * B);
  Matrix rh_all(H, steps_ * B);
  Matrix dh = Matrix::Zero(H, B);
  Matrix d_rh(H, B);
  for (Index t = steps_ - 1; t >= 0; --t) {
    const Index c0 = t * B;
    dh += d_states.middleCols(c0, B);
    const auto hp = h_prev_.middleCols(c0, B).array();
    const auto z = z_.middleCols(c0, B).array();
    const auto r = r_.middleCols(c0, B).array();
    const auto c = c_.middleCols(c0, B).array();
    const auto g = dh.array();

    auto az = da_z.middleCols(c0, B);
    auto ar = da_r.middleCols(c0, B);
    auto ah = da_h.middleCols(c0, B);
    az = (g * (c - hp) * z * (1.0 - z)).matrix();
    ah = (g * z * (1.0 - c.square())).matrix();
    rh_all.middleCols(c0, B) = (r * hp).matrix();
    d_rh.noalias() = U_h.transpose() * ah;
    ar = (d_rh.array() * hp * r * (1.0 - r)).matrix();

    Matrix next = (g * (1.0 - z) + d_rh.array() * r).matrix();
    next.noalias() += U_z.transpose() * az;
    next.noalias() += U_r.transpose() * ar;
    dh = std::move(next);
  }
  grad_h0_ = dh;

  gW_z.noalias() += da_z * x_.transpose();
  gW_r.noalias() += da_r * x_.transpose();
  gW_h.noalias() += da_h * x_.transpose();
  gU_z.noalias() += da_z * h_prev_.transpose();
  gU_r.noalias() += da_r * h_prev_.transpose();
  gU_h.noalias() += da_h * rh_all.transpose();
  gb_z += da_z.rowwise().sum();
  gb_r += da_r.rowwise().sum();
  gb_h += da_h.rowwise().sum();

  Matrix dx = W_z.transpose() * da_z;
  dx.noalias() += W_r.transpose() * da_r;
  dx.noalias() += W_h.transpose() * da_h;
  return dx;
}

void Gru::zero_grad() {
  gW_z = Matrix::Zero(W_z.rows(), W_z.cols());
  gW_r = Matrix::Zero(W_r.rows(), W_r.cols());
  gW_h = Matrix::Zero(W_h.rows(), W_h.cols());
  gU_z = Matrix::Zero(U_z.rows(), U_z.cols());
  gU_r = Matrix::Zero(U_r.rows(), U_r.cols());
  gU_h = Matrix::Zero(U_h.rows(), U_h.cols());
  gb_z = Matrix::Zero(b_z.rows(), 1);
  gb_r = Matrix::Zero(b_r.rows(), 1);
  gb_h = Matrix::Zero(b_h.rows(), 1);
}

void Gru::collect(ParamList& out, const std::string& p) {
  out.push_back({p + ".W_z", &W_z, &gW_z});
  out.push_back({p + ".W_r", &W_r, &gW_r});
  out.push_back({p + ".W_h", &W_h, &gW_h});
  out.push_back({p + ".U_z", &U_z, &gU_z});
  out.push_back({p + ".U_r", &U_r, &gU_r});
  out.push_back({p + ".U_h", &U_h, &gU_h});
  out.push_back({p + ".b_z", &b_z, &gb_z});
  out.push_back({p + ".b_r", &b_r, &gb_r});
  out.push_back({p + ".b_h", &b_h, &gb_h});
}

}  // namespace epsnet::nn
