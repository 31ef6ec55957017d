// SPDX-License-Identifier: Apache-2.0
//
// Benchmark forecasters: the seasonal random walk and a cross-sectional regression that predicts
// the cumulative EPS of the quarters left in the fiscal year.
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include "epsnet/linalg.hpp"
#include "epsnet/panel.hpp"

namespace epsnet {

struct BenchmarkPrediction {
  std::optional<double> q_eps;
  std::optional<double> y_eps;
};

/// Quarterly: same fiscal quarter one year earlier. Annual: the previous fiscal year's four
/// quarters. Only data reported before the target's report date is used.
BenchmarkPrediction random_walk_predict(const PanelIndex& panel, const QuarterRecord& target);

inline constexpr int kRegressionLags = 4;
inline constexpr const char* kRegressionRecipe = "eps_lag1-4+bve_ps+accruals_ps+dividends_ps+const";

/// What is known about a firm at one announcement.
struct RegressionState {
  /// Quarters of the target fiscal year still unreported (0..4).
  int horizon = 0;
  /// Sum of the target year's already reported quarters.
  double known_sum = 0.0;
  /// Most recent reported quarterly EPS first.
  std::array<double, kRegressionLags> lag_eps{};
  double book_equity_ps = 0.0;
  double accruals_ps = 0.0;
  double dividends_ps = 0.0;

  /// Predictor row in recipe order, intercept last.
  Eigen::RowVectorXd predictors() const;
};

/// State before the report date of `target`: horizon = 5 - fiscal_quarter. Returns nullopt when
/// the four consecutive lags or the latest balance-sheet values are missing.
std::optional<RegressionState> regression_state(const PanelIndex& panel, const QuarterRecord& target);

struct RegressionBenchmark {
  std::string recipe = kRegressionRecipe;
  /// fits[h-1] predicts the cumulative EPS of the next h quarters.
  std::array<OlsFit, 4> fits;

  std::string to_json() const;
  static RegressionBenchmark from_json(const std::string& text);
};

struct RegressionFitLog {
  std::array<std::size_t, 4> rows{};
  std::size_t skipped_missing_predictors = 0;
  std::size_t skipped_incomplete_year = 0;
};

/// One OLS per horizon over the training targets; rows need the full remainder of the fiscal
/// year. Throws DataError when a horizon has fewer rows than predictors.
RegressionBenchmark fit_regression_benchmark(const PanelIndex& panel, std::span<const QuarterRecord> train_targets,
                                             RegressionFitLog* log = nullptr);

/// annual = known_sum + predicted remainder; quarterly = remainder / horizon (none when horizon 0).
BenchmarkPrediction regression_predict(const RegressionBenchmark& model, const RegressionState& state);

}  // namespace epsnet
