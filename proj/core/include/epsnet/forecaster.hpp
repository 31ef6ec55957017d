// SPDX-License-Identifier: Apache-2.0
//
// The earnings forecaster: a two-layer GRU over the accounting history whose last state is
// merged with the market vector and passed through a small dense stack with two outputs
// (quarterly EPS, annual EPS). Trained with Adam on MAE, EMA early stopping, 5-seed ensemble.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "epsnet/features.hpp"
#include "epsnet/nn/adam.hpp"
#include "epsnet/nn/checkpoint.hpp"
#include "epsnet/nn/gru.hpp"
#include "epsnet/nn/layers.hpp"

namespace epsnet {

struct NetShape {
  nn::Index accounting = kAccountingFeatures;
  nn::Index gru1 = 76;
  nn::Index gru2 = 38;
  nn::Index market = kMarketFeatures;
  nn::Index dense1 = 19;
  nn::Index dense2 = 8;
  nn::Index outputs = 2;
  nn::Index steps = kWindowLength;

  nn::Index merged() const { return gru2 + market; }
  bool operator==(const NetShape&) const = default;
};

struct ForwardMode {
  bool dropout = false;
  bool batch_stats = false;
  bool update_running = false;

  static ForwardMode train() { return {true, true, true}; }
  static ForwardMode infer() { return {false, false, false}; }
};

/// Standardization of the two regression targets, fitted on training windows.
struct TargetScaling {
  double q_mean = 0.0;
  double q_std = 1.0;
  double y_mean = 0.0;
  double y_std = 1.0;

  static TargetScaling fit(std::span<const FeatureWindow> windows);
};

struct WindowBatch {
  nn::Matrix acc;     // accounting x (steps * size)
  nn::Matrix market;  // market x size
  nn::Matrix target;  // 2 x size, standardized
  nn::Index size = 0;
};

/// Uses the last `steps` rows of each window.
WindowBatch make_batch(std::span<const FeatureWindow> windows, std::span<const std::size_t> rows,
                       const TargetScaling& scaling, nn::Index steps = kWindowLength);
WindowBatch make_batch(std::span<const FeatureWindow> windows, const TargetScaling& scaling,
                       nn::Index steps = kWindowLength);

class ForecastNet {
 public:
  explicit ForecastNet(NetShape shape = {}, double dropout = 0.001);

  void init(std::uint64_t seed);

  /// Returns outputs x batch in standardized target units.
  nn::Matrix forward(const WindowBatch& batch, ForwardMode mode, nn::Rng& rng);
  nn::Matrix forward(const WindowBatch& batch);
  void backward(const nn::Matrix& d_out);

  void zero_grad();
  nn::ParamList params();
  std::size_t parameter_count();

  /// Trainable parameters followed by batch-norm running statistics.
  std::vector<nn::NamedTensor> state() const;
  void load_state(std::span<const nn::NamedTensor> tensors);

  const NetShape& shape() const { return shape_; }
  double dropout_rate() const { return drop_gru1_.rate(); }

  nn::Gru gru1, gru2;
  nn::Dense dense1, dense2, head;
  nn::BatchNorm bn1, bn2;

 private:
  NetShape shape_;
  nn::Dropout drop_gru1_, drop_gru2_, drop_dense1_, drop_dense2_;
  nn::Tanh act1_, act2_;
  nn::Index batch_ = 0;
};

struct TrainConfig {
  std::size_t batch_size = 512;
  double learning_rate = 0.0075;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout = 0.001;
  double ema_lambda = 0.2;
  int ensemble_size = 5;
  int max_epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

/// EMA_1 = s_1, EMA_e = lambda s_e + (1 - lambda) EMA_{e-1}; signals a stop at the first
/// epoch whose EMA strictly exceeds its predecessor.
class EmaEarlyStopping {
 public:
  explicit EmaEarlyStopping(double lambda);
  bool update(double score);
  const std::vector<double>& ema() const { return ema_; }

 private:
  double lambda_;
  std::vector<double> ema_;
};

struct StopReport {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  bool stopped_early = false;
  /// Epoch whose parameters were returned (1-based).
  int restored_epoch = 0;
  std::vector<double> validation_scores;
  std::vector<double> ema;
  std::vector<double> train_loss;
  double fixed_batch_loss_before = 0.0;
  double fixed_batch_loss_after_epoch1 = 0.0;
};

struct TrainHooks {
  /// Replaces the validation MAE when set (epoch is 1-based).
  std::function<double(int epoch, ForecastNet& net)> validation_score;
  std::function<void(int epoch, const ForecastNet& net)> on_epoch_end;
};

struct TrainedMember {
  ForecastNet net;
  StopReport report;
};

/// Validation score: sum of the two heads' MAE in standardized units, inference mode.
double validation_mae(ForecastNet& net, std::span<const FeatureWindow> windows, const TargetScaling& scaling);

TrainedMember train_one(const TrainConfig& config, std::span<const FeatureWindow> train,
                        std::span<const FeatureWindow> validation, const TargetScaling& scaling, std::uint64_t seed,
                        const TrainHooks* hooks = nullptr, NetShape shape = {});

struct Prediction {
  double q_eps = 0.0;
  double y_eps = 0.0;
};

/// Single-window forward in original EPS units.
Prediction forward(ForecastNet& net, const FeatureWindow& window, ForwardMode mode, nn::Rng& rng,
                   const TargetScaling& scaling);

/// Arithmetic mean that does not depend on the order of `values` (sorted, incremental).
double order_free_mean(std::vector<double> values);

class EnsembleModel {
 public:
  static constexpr int kFormatVersion = 1;

  std::vector<ForecastNet> members;
  FeatureStats stats;
  std::string stats_id;
  TargetScaling scaling;
  TrainConfig config;
  NetShape shape;
  std::vector<StopReport> reports;

  void save(const std::string& dir) const;
  static EnsembleModel load(const std::string& dir);
};

/// Members use seeds config.seed + 0 .. ensemble_size-1 and may train concurrently
/// (QC_THREADS caps the worker count).
EnsembleModel train_ensemble(const TrainConfig& config, std::span<const FeatureWindow> train,
                             std::span<const FeatureWindow> validation, const FeatureStats& stats,
                             NetShape shape = {});

/// Inference-mode member mean. Throws DataError when windows were built with other stats.
std::vector<Prediction> predict(const EnsembleModel& model, std::span<const FeatureWindow> windows);

/// Worker count from QC_THREADS (defaults to hardware concurrency, minimum 1).
unsigned worker_threads();

}  // namespace epsnet
