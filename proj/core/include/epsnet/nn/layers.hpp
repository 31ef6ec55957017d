// SPDX-License-Identifier: Apache-2.0
//
// Minimal differentiable layers. Activations are laid out features x batch (one column per
// sample). Every layer caches what its backward pass needs from the most recent forward call.
#pragma once

#include <Eigen/Core>
#include <random>
#include <string>
#include <vector>

namespace epsnet::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// A trainable tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  Matrix* value;
  Matrix* grad;
};
using ParamList = std::vector<ParamRef>;

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& m, Index fan_in, Index fan_out, Rng& rng);

class Dense {
 public:
  Dense() = default;
  Dense(Index in, Index out);

  void init(Rng& rng);
  Matrix forward(const Matrix& x);
  /// Accumulates parameter gradients; returns the input gradient.
  Matrix backward(const Matrix& dy);
  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);

  Index inputs() const { return weight.cols(); }
  Index outputs() const { return weight.rows(); }

  Matrix weight;  // out x in
  Matrix bias;    // out x 1
  Matrix grad_weight;
  Matrix grad_bias;

 private:
  Matrix input_;
};

class Tanh {
 public:
  Matrix forward(const Matrix& x);
  Matrix backward(const Matrix& dy) const;

 private:
  Matrix output_;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) in training; identity otherwise.
class Dropout {
 public:
  explicit Dropout(double rate = 0.0);

  Matrix forward(const Matrix& x, bool training, Rng& rng);
  Matrix backward(const Matrix& dy) const;
  double rate() const { return rate_; }

 private:
  double rate_;
  bool active_ = false;
  Matrix mask_;
};

/// Per-feature batch normalization. Training mode normalizes with batch statistics (population
/// variance) and updates running averages; inference mode uses the running averages.
class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(Index features, double momentum = 0.9, double epsilon = 1e-5);

  Matrix forward(const Matrix& x, bool batch_stats, bool update_running = true);
  Matrix backward(const Matrix& dy);
  void zero_grad();
  void collect(ParamList& out, const std::string& prefix);

  Matrix gamma;  // features x 1
  Matrix beta;
  Matrix grad_gamma;
  Matrix grad_beta;
  Matrix running_mean;
  Matrix running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;

 private:
  bool batch_mode_ = true;
  Matrix xhat_;
  Vector inv_std_;
};

struct Loss {
  double value = 0.0;
  Matrix grad;
};

/// Mean absolute error over all elements; gradient sign(pred - target) / N with 0 at ties.
Loss mae_loss(const Matrix& pred, const Matrix& target);

}  // namespace epsnet::nn
