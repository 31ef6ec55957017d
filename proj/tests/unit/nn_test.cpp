// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "epsnet/error.hpp"
#include "epsnet/nn/adam.hpp"
#include "epsnet/nn/checkpoint.hpp"
#include "epsnet/nn/gru.hpp"
#include "epsnet/nn/layers.hpp"
#include "oracles.hpp"

using namespace epsnet;
using namespace epsnet::nn;
namespace oracle = epsnet::oracle;

namespace {

double weighted_sum(const Matrix& out, const Matrix& w) { return (out.array() * w.array()).sum(); }

}  // namespace

TEST(Dense, GradientsMatchFiniteDifferences) {
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    Dense d(4, 3);
    d.init(rng);
    d.bias = oracle::random_matrix(3, 1, rng);
    const Matrix x = oracle::random_matrix(4, 5, rng);
    const Matrix w = oracle::random_matrix(3, 5, rng);
    d.zero_grad();
    d.forward(x);
    const Matrix dx = d.backward(w);
    ParamList params;
    d.collect(params, "d");
    EXPECT_LT(oracle::max_param_gradient_error([&] { return weighted_sum(d.forward(x), w); }, params), 1e-6);
    EXPECT_LT(oracle::max_input_gradient_error([&](const Matrix& p) { return weighted_sum(d.forward(p), w); }, x, dx),
              1e-6);
  }
}

TEST(Dense, RejectsWrongInputRows) {
  Dense d(4, 3);
  EXPECT_THROW(d.forward(Matrix::Zero(3, 2)), ShapeError);
}

TEST(Tanh, BackwardIsOneMinusSquare) {
  Tanh t;
  Matrix x(1, 3);
  x << -1.0, 0.0, 2.0;
  const Matrix y = t.forward(x);
  const Matrix g = t.backward(Matrix::Ones(1, 3));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(g(0, i), 1.0 - std::tanh(x(0, i)) * std::tanh(x(0, i)), 1e-15);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.0);
}

TEST(Dropout, InvertedScalingKeepsExpectation) {
  Dropout drop(0.25);
  Rng rng(3);
  const Matrix x = Matrix::Ones(50, 400);
  const Matrix y = drop.forward(x, true, rng);
  EXPECT_NEAR(y.mean(), 1.0, 0.02);
  for (Index i = 0; i < y.size(); ++i) EXPECT_TRUE(y.data()[i] == 0.0 || std::abs(y.data()[i] - 1.0 / 0.75) < 1e-15);
  const Matrix g = drop.backward(Matrix::Ones(50, 400));
  EXPECT_TRUE(g.isApprox(y));
  EXPECT_TRUE(drop.forward(x, false, rng).isApprox(x));
}

TEST(BatchNorm, TrainingOutputHasUnitPopulationMoments) {
  BatchNorm bn(3);
  Rng rng(4);
  const Matrix x = oracle::random_matrix(3, 64, rng, 5.0).array() + 2.0;
  const Matrix y = bn.forward(x, true, true);
  for (Index f = 0; f < 3; ++f) {
    EXPECT_NEAR(y.row(f).mean(), 0.0, 1e-12);
    EXPECT_NEAR(y.row(f).array().square().mean(), 1.0, 1e-3);
  }
  const Vector mean = x.rowwise().mean();
  EXPECT_NEAR(bn.running_mean(0, 0), 0.1 * mean(0), 1e-12);
}

TEST(BatchNorm, InferenceUsesRunningStatistics) {
  BatchNorm bn(1);
  bn.running_mean(0, 0) = 2.0;
  bn.running_var(0, 0) = 4.0;
  bn.gamma(0, 0) = 3.0;
  bn.beta(0, 0) = 1.0;
  Matrix x(1, 1);
  x << 6.0;
  EXPECT_NEAR(bn.forward(x, false)(0, 0), 3.0 * (4.0 / std::sqrt(4.0 + 1e-5)) + 1.0, 1e-12);
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    BatchNorm bn(3);
    bn.gamma = oracle::random_matrix(3, 1, rng);
    bn.beta = oracle::random_matrix(3, 1, rng);
    const Matrix x = oracle::random_matrix(3, 7, rng);
    const Matrix w = oracle::random_matrix(3, 7, rng);
    bn.zero_grad();
    bn.forward(x, true, false);
    const Matrix dx = bn.backward(w);
    ParamList params;
    bn.collect(params, "bn");
    EXPECT_LT(oracle::max_param_gradient_error([&] { return weighted_sum(bn.forward(x, true, false), w); }, params),
              1e-5);
    EXPECT_LT(oracle::max_input_gradient_error(
                  [&](const Matrix& p) { return weighted_sum(bn.forward(p, true, false), w); }, x, dx),
              1e-5);
  }
}

TEST(MaeLoss, ValueAndSubgradient) {
  Matrix p(2, 2), t(2, 2);
  p << 1, 2, 3, 4;
  t << 0, 2, 5, 3;
  const Loss l = mae_loss(p, t);
  EXPECT_DOUBLE_EQ(l.value, (1 + 0 + 2 + 1) / 4.0);
  EXPECT_DOUBLE_EQ(l.grad(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(l.grad(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(l.grad(1, 0), -0.25);
}

TEST(Gru, MatchesScalarRecurrence) {
  Rng rng(6);
  Gru gru(3, 2);
  gru.init(rng);
  for (Matrix* b : {&gru.b_z, &gru.b_r, &gru.b_h}) *b = oracle::random_matrix(2, 1, rng);
  const Index steps = 3, B = 2;
  const Matrix seq = oracle::random_matrix(3, steps * B, rng);
  const Matrix h0 = oracle::random_matrix(2, B, rng, 0.5);
  const Matrix out = gru.forward(seq, steps, h0);

  std::vector<oracle::Grid> x(steps, oracle::Grid(B, std::vector<double>(3)));
  for (Index t = 0; t < steps; ++t)
    for (Index b = 0; b < B; ++b)
      for (Index i = 0; i < 3; ++i) x[t][b][i] = seq(i, t * B + b);
  oracle::Grid h(B, std::vector<double>(2));
  for (Index b = 0; b < B; ++b)
    for (Index k = 0; k < 2; ++k) h[b][k] = h0(k, b);
  const auto ref = oracle::scalar_gru(gru, x, h);
  for (Index t = 0; t < steps; ++t)
    for (Index b = 0; b < B; ++b)
      for (Index k = 0; k < 2; ++k) EXPECT_NEAR(out(k, t * B + b), ref[t][b][k], 1e-12);
}

TEST(Gru, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  Gru gru(3, 4);
  gru.init(rng);
  for (Matrix* b : {&gru.b_z, &gru.b_r, &gru.b_h}) *b = oracle::random_matrix(4, 1, rng, 0.3);
  const Index steps = 4, B = 3;
  const Matrix seq = oracle::random_matrix(3, steps * B, rng);
  const Matrix h0 = oracle::random_matrix(4, B, rng, 0.5);
  const Matrix w = oracle::random_matrix(4, steps * B, rng);
  gru.zero_grad();
  gru.forward(seq, steps, h0);
  const Matrix dx = gru.backward(w);
  ParamList params;
  gru.collect(params, "g");
  EXPECT_LT(oracle::max_param_gradient_error([&] { return weighted_sum(gru.forward(seq, steps, h0), w); }, params),
            1e-6);
  EXPECT_LT(oracle::max_input_gradient_error(
                [&](const Matrix& p) { return weighted_sum(gru.forward(p, steps, h0), w); }, seq, dx),
            1e-6);
  const Matrix dh0 = gru.grad_h0();
  EXPECT_LT(oracle::max_input_gradient_error(
                [&](const Matrix& p) { return weighted_sum(gru.forward(seq, steps, p), w); }, h0, dh0),
            1e-6);
}

TEST(Gru, RejectsBadLayout) {
  Gru gru(3, 2);
  EXPECT_THROW(gru.forward(Matrix::Zero(3, 5), 2, Matrix::Zero(2, 2)), ShapeError);
  EXPECT_THROW(gru.forward(Matrix::Zero(2, 4), 2, Matrix::Zero(2, 2)), ShapeError);
}

TEST(Adam, TwoStepsMatchUnrolledRecurrence) {
  const AdamConfig cfg;
  for (double g : {0.3, -2.0, 1e-3}) {
    Matrix value = Matrix::Constant(1, 1, 0.5), grad = Matrix::Constant(1, 1, g);
    ParamList params{{"p", &value, &grad}};
    AdamState state(cfg, params);
    adam_step(state, params);
    EXPECT_NEAR(value(0, 0), oracle::adam_unrolled(0.5, g, 1, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon),
                1e-12);
    adam_step(state, params);
    EXPECT_NEAR(value(0, 0), oracle::adam_unrolled(0.5, g, 2, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon),
                1e-12);
    EXPECT_EQ(state.step, 2);
  }
}

TEST(Adam, FirstStepIsLearningRateInMagnitude) {
  const AdamConfig cfg;
  Matrix value = Matrix::Zero(1, 3), grad(1, 3);
  grad << 100.0, -250.0, 1e4;
  ParamList params{{"p", &value, &grad}};
  AdamState state(cfg, params);
  adam_step(state, params);
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(std::abs(value(0, i)) / cfg.learning_rate, 1.0, 1e-9);
  EXPECT_LT(value(0, 0), 0.0);
  EXPECT_GT(value(0, 1), 0.0);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng(8);
  std::vector<NamedTensor> tensors{{"a", oracle::random_matrix(3, 2, rng)}, {"b.c", oracle::random_matrix(1, 5, rng)}};
  std::stringstream s;
  write_checkpoint(s, tensors);
  const auto back = read_checkpoint(s);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].name, "b.c");
  EXPECT_EQ(back[0].value, tensors[0].value);
  EXPECT_EQ(back[1].value, tensors[1].value);
}

TEST(Checkpoint, RejectsCorruptHeader) {
  std::stringstream s("NOTACKPT....");
  EXPECT_THROW(read_checkpoint(s), Error);
}
