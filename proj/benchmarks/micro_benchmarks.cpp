// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "epsnet/forecaster.hpp"
#include "epsnet/linalg.hpp"
#include "epsnet/nn/gru.hpp"
#include "epsnet/rank_tests.hpp"

namespace {

using epsnet::nn::Index;
using epsnet::nn::Matrix;

Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  return m;
}

void BM_GruForward(benchmark::State& state) {
  const Index B = state.range(0), steps = 20;
  std::mt19937_64 rng(1);
  epsnet::nn::Gru gru(6, 76);
  gru.init(rng);
  const Matrix x = random_matrix(6, steps * B, rng);
  const Matrix h0 = Matrix::Zero(76, B);
  for (auto _ : state) benchmark::DoNotOptimize(gru.forward(x, steps, h0));
  state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_GruForward)->Arg(32)->Arg(256);

void BM_GruBackward(benchmark::State& state) {
  const Index B = state.range(0), steps = 20;
  std::mt19937_64 rng(2);
  epsnet::nn::Gru gru(6, 76);
  gru.init(rng);
  const Matrix x = random_matrix(6, steps * B, rng);
  const Matrix dy = random_matrix(76, steps * B, rng);
  gru.forward(x, steps, Matrix::Zero(76, B));
  for (auto _ : state) benchmark::DoNotOptimize(gru.backward(dy));
  state.SetItemsProcessed(state.iterations() * B);
}
BENCHMARK(BM_GruBackward)->Arg(32)->Arg(256);

void BM_NetTrainStep(benchmark::State& state) {
  std::mt19937_64 rng(3);
  epsnet::ForecastNet net;
  net.init(3);
  epsnet::WindowBatch batch;
  batch.size = state.range(0);
  batch.acc = random_matrix(6, 20 * batch.size, rng);
  batch.market = random_matrix(10, batch.size, rng);
  const Matrix d_out = random_matrix(2, batch.size, rng);
  epsnet::nn::Rng drop(4);
  for (auto _ : state) {
    net.zero_grad();
    benchmark::DoNotOptimize(net.forward(batch, {true, true, true}, drop));
    net.backward(d_out);
  }
  state.SetItemsProcessed(state.iterations() * batch.size);
}
BENCHMARK(BM_NetTrainStep)->Arg(256);

void BM_Ols(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const Index n = state.range(0);
  Eigen::MatrixXd X = random_matrix(n, 12, rng);
  X.col(0).setOnes();
  const Eigen::VectorXd y = random_matrix(n, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(epsnet::ols(X, y));
}
BENCHMARK(BM_Ols)->Arg(1000)->Arg(20000);

void BM_Wilcoxon(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z(0.1, 1.0);
  std::vector<double> d(static_cast<std::size_t>(state.range(0)));
  for (double& x : d) x = z(rng);
  for (auto _ : state) benchmark::DoNotOptimize(epsnet::wilcoxon_signed_rank(d));
}
BENCHMARK(BM_Wilcoxon)->Arg(20)->Arg(5000);

}  // namespace
BENCHMARK_MAIN();
