// SPDX-License-Identifier: Apache-2.0
//
// End-to-end steps shared by the command-line tool and the tests.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epsnet/benchmarks.hpp"
#include "epsnet/evaluation.hpp"
#include "epsnet/event_study.hpp"
#include "epsnet/features.hpp"
#include "epsnet/forecaster.hpp"
#include "epsnet/panel.hpp"
#include "epsnet/run_config.hpp"

namespace epsnet {

struct PreparedData {
  CleanResult clean;
  SplitDataset split;
  std::vector<FeatureWindow> raw_train;
  std::vector<FeatureWindow> raw_validation;
  std::vector<FeatureWindow> raw_test;
  WindowBuildLog train_log;
  WindowBuildLog validation_log;
  WindowBuildLog test_log;
};

/// Clean, split chronologically and build raw windows for every partition.
PreparedData prepare_data(std::span<const QuarterRecord> quarters, const MarketIndex& market,
                          SplitFractions fractions = {});

struct ModelBundle {
  EnsembleModel ensemble;
  RegressionBenchmark regression;

  /// Ensemble files plus regression.json.
  void save(const std::string& dir) const;
  static ModelBundle load(const std::string& dir);
};

/// Fits feature stats on the training windows, trains the ensemble and the regression benchmark.
ModelBundle train_models(const PreparedData& data, const TrainConfig& config);

/// One row per test window with RNN, analyst, regression and random-walk forecasts.
ForecastSet build_forecast_set(const PreparedData& data, const MarketIndex& market, const ModelBundle& bundle);

using OutputFiles = std::vector<std::pair<std::string, std::string>>;

/// Report files (name, content) for both horizons. `slice` restricts output to one partition
/// (quarter, size, industry, year, covid, coverage or matched).
OutputFiles evaluate_forecasts(const ForecastSet& forecasts, const EvaluationConfig& config,
                               const std::optional<std::string>& slice = std::nullopt);

/// Coefficient tables per model for one frequency.
OutputFiles run_erc(const ForecastSet& forecasts, const MarketIndex& market, Horizon frequency);

void write_output_files(const std::string& dir, const OutputFiles& files);

}  // namespace epsnet
