// SPDX-License-Identifier: Apache-2.0
#include "epsnet/nn/layers.hpp"

#include <cmath>

#include "epsnet/error.hpp"

namespace epsnet::nn {

void glorot_uniform(Matrix& m, Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

Dense::Dense(Index in, Index out)
    : weight(Matrix::Zero(out, in)),
      bias(Matrix::Zero(out, 1)),
      grad_weight(Matrix::Zero(out, in)),
      grad_bias(Matrix::Zero(out, 1)) {}

void Dense::init(Rng& rng) {
  glorot_uniform(weight, inputs(), outputs(), rng);
  bias.setZero();
}

Matrix Dense::forward(const Matrix& x) {
  if (x.rows() != inputs())
    throw ShapeError("Dense: expected " + std::to_string(inputs()) + " input rows, got " + std::to_string(x.rows()));
  input_ = x;
  Matrix y = weight * x;
  y.colwise() += bias.col(0);
  return y;
}

Matrix Dense::backward(const Matrix& dy) {
  if (dy.rows() != outputs() || dy.cols() != input_.cols()) throw ShapeError("Dense: gradient shape mismatch");
  grad_weight.noalias() += dy * input_.transpose();
  grad_bias += dy.rowwise().sum();
  return weight.transpose() * dy;
}

void Dense::zero_grad() {
  grad_weight.setZero();
  grad_bias.setZero();
}

void Dense::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight, &grad_weight});
  out.push_back({prefix + ".bias", &bias, &grad_bias});
}

Matrix Tanh::forward(const Matrix& x) {
  output_ = x.array().tanh().matrix();
  return output_;
}

Matrix Tanh::backward(const Matrix& dy) const {
  if (dy.rows() != output_.rows() || dy.cols() != output_.cols()) throw ShapeError("Tanh: gradient shape mismatch");
  return (dy.array() * (1.0 - output_.array().square())).matrix();
}

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DataError("dropout rate must be in [0, 1)");
}

Matrix Dropout::forward(const Matrix& x, bool training, Rng& rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  const double keep_scale = 1.0 / (1.0 - rate_);
  std::bernoulli_distribution drop(rate_);
  mask_.resize(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) mask_(i, j) = drop(rng) ? 0.0 : keep_scale;
  return (x.array() * mask_.array()).matrix();
}

Matrix Dropout::backward(const Matrix& dy) const {
  if (!active_) return dy;
  return (dy.array() * mask_.array()).matrix();
}

BatchNorm::BatchNorm(Index features, double momentum_, double epsilon_)
    : gamma(Matrix::Ones(features, 1)),
      beta(Matrix::Zero(features, 1)),
      grad_gamma(Matrix::Zero(features, 1)),
      grad_beta(Matrix::Zero(features, 1)),
      running_mean(Matrix::Zero(features, 1)),
      running_var(Matrix::Ones(features, 1)),
      momentum(momentum_),
      epsilon(epsilon_) {}

Matrix BatchNorm::forward(const Matrix& x, bool batch_stats, bool update_running) {
  if (x.rows() != gamma.rows()) throw ShapeError("BatchNorm: feature count mismatch");
  batch_mode_ = batch_stats;
  Vector mean, var;
  if (batch_stats) {
    if (x.cols() < 1) throw ShapeError("BatchNorm: empty batch");
    mean = x.rowwise().mean();
    var = (x.colwise() - mean).array().square().rowwise().mean();
    if (update_running) {
      running_mean = momentum * running_mean + (1.0 - momentum) * mean;
      running_var = momentum * running_var + (1.0 - momentum) * var;
    }
  } else {
    mean = running_mean.col(0);
    var = running_var.col(0);
  }
  inv_std_ = (var.array() + epsilon).rsqrt().matrix();
  xhat_ = ((x.colwise() - mean).array().colwise() * inv_std_.array()).matrix();
  Matrix y = (xhat_.array().colwise() * gamma.col(0).array()).matrix();
  y.colwise() += beta.col(0);
  return y;
}

Matrix BatchNorm::backward(const Matrix& dy) {
  if (dy.rows() != xhat_.rows() || dy.cols() != xhat_.cols()) throw ShapeError("BatchNorm: gradient shape mismatch");
  grad_gamma += (dy.array() * xhat_.array()).rowwise().sum().matrix();
  grad_beta += dy.rowwise().sum();
  const Eigen::ArrayXXd dxhat = dy.array().colwise() * gamma.col(0).array();
  if (!batch_mode_) return (dxhat.colwise() * inv_std_.array()).matrix();
  const auto b = static_cast<double>(dy.cols());
  const Eigen::ArrayXd sum_dxhat = dxhat.rowwise().sum();
  const Eigen::ArrayXd sum_dxhat_xhat = (dxhat * xhat_.array()).rowwise().sum();
  Eigen::ArrayXXd dx = b * dxhat;
  dx.colwise() -= sum_dxhat;
  dx -= xhat_.array().colwise() * sum_dxhat_xhat;
  dx.colwise() *= inv_std_.array() / b;
  return dx.matrix();
}

void BatchNorm::zero_grad() {
  grad_gamma.setZero();
  grad_beta.setZero();
}

void BatchNorm::collect(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", &gamma, &grad_gamma});
  out.push_back({prefix + ".beta", &beta, &grad_beta});
}

Loss mae_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mae_loss: shape mismatch");
  if (pred.size() == 0) throw ShapeError("mae_loss: empty input");
  const auto n = static_cast<double>(pred.size());
  const Eigen::ArrayXXd diff = pred.array() - target.array();
  Loss l;
  l.value = diff.abs().sum() / n;
  l.grad = (diff.sign() / n).matrix();
  return l;
}

}  // namespace epsnet::nn
