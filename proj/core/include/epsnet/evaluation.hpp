// SPDX-License-Identifier: Apache-2.0
//
// Forecast evaluation: sample filters, median (absolute) percentage differences, sign
// prediction metrics, partitioned comparisons and the matched covered/uncovered analysis.
#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epsnet/date.hpp"
#include "epsnet/rank_tests.hpp"

namespace epsnet {

enum class ModelTag { Rnn = 0, Analyst = 1, Regression = 2, RandomWalk = 3 };
inline constexpr std::array<ModelTag, 4> kAllModels{ModelTag::Rnn, ModelTag::Analyst, ModelTag::Regression,
                                                    ModelTag::RandomWalk};
std::string_view model_name(ModelTag m);

enum class Horizon { Quarterly, Annual };
std::string_view horizon_name(Horizon h);
Horizon parse_horizon(std::string_view text);

/// One target announcement with every model's forecasts. Missing values are NaN.
struct ForecastRow {
  std::string firm_id;
  int fiscal_year = 0;
  int fiscal_quarter = 0;
  std::optional<Date> report_date;
  double total_assets = 0.0;
  double tobins_q = 0.0;
  std::string industry = "Other";
  double stock_price = 0.0;
  bool covered = false;
  double actual_q = 0.0;
  double actual_y = 0.0;
  /// Same fiscal quarter one year earlier / previous fiscal year; for sign prediction.
  double prev_q = 0.0;
  double prev_y = 0.0;
  std::array<double, 4> pred_q{};
  std::array<double, 4> pred_y{};

  double actual(Horizon h) const { return h == Horizon::Annual ? actual_y : actual_q; }
  double previous(Horizon h) const { return h == Horizon::Annual ? prev_y : prev_q; }
  double prediction(ModelTag m, Horizon h) const {
    const auto i = static_cast<std::size_t>(m);
    return h == Horizon::Annual ? pred_y[i] : pred_q[i];
  }
  double& prediction(ModelTag m, Horizon h) {
    const auto i = static_cast<std::size_t>(m);
    return h == Horizon::Annual ? pred_y[i] : pred_q[i];
  }
};

struct ForecastSet {
  std::vector<ForecastRow> rows;

  void write_csv(std::ostream& out) const;
  static ForecastSet read_csv(std::istream& in);
  void save(const std::string& path) const;
  static ForecastSet load(const std::string& path);
};

/// (actual - predicted) / actual. Throws DataError when actual is 0.
double percentage_difference(double actual, double predicted);
/// Mean of the two middle order statistics for even n.
double median(std::vector<double> values);

struct ErrorSummary {
  std::size_t n = 0;
  /// Fractions, not percent.
  double mapd = 0.0;
  double mpd = 0.0;
};
ErrorSummary summarize_errors(std::span<const double> actual, std::span<const double> predicted);

struct SampleFilterConfig {
  Horizon horizon = Horizon::Annual;
  std::vector<ModelTag> models{kAllModels.begin(), kAllModels.end()};
  double penny_threshold = 5.0;
  double trim = 0.05;
};

struct FilterLog {
  std::size_t input = 0;
  std::size_t missing_model = 0;
  std::size_t zero_actual = 0;
  std::size_t penny = 0;
  std::size_t trimmed_low = 0;
  std::size_t trimmed_high = 0;
  std::size_t survivors = 0;
};

struct FilterResult {
  std::vector<ForecastRow> rows;
  FilterLog log;
};

/// Drops rows with a missing actual or model forecast, zero actuals, prices below the penny
/// threshold, then floor(trim * n) rows from each tail of the percentage errors pooled over
/// `models`. Throws DataError when nothing survives.
FilterResult apply_sample_filters(std::span<const ForecastRow> rows, const SampleFilterConfig& config);

enum class SignClass { Negative = 0, Neutral = 1, Positive = 2 };

/// Neutral iff |(eps - previous) / previous| < threshold. Throws DataError when previous is 0.
SignClass sign_classify(double eps, double previous, double threshold = 0.05);

/// Rows: actual class, columns: predicted class.
using Confusion = std::array<std::array<std::size_t, 3>, 3>;

struct SignReport {
  Confusion confusion{};
  std::size_t n = 0;
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  std::array<double, 3> f1{};
  double average_accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  /// Mean of per-class F1.
  double macro_f1 = 0.0;
  /// Harmonic mean of macro precision and macro recall.
  double macro_f1_harmonic = 0.0;
};

SignReport macro_metrics(const Confusion& confusion);

/// Rows with a zero or missing previous value are skipped.
SignReport sign_report(std::span<const ForecastRow> rows, ModelTag model, Horizon horizon, double threshold = 0.05);

enum class PartitionKey { All, Quarter, SizeDecile, Industry, Year, Covid, Coverage };
std::string_view partition_name(PartitionKey key);
PartitionKey parse_partition_key(std::string_view text);

/// Decile of each value: 1 + number of nearest-rank decile boundaries it exceeds.
std::vector<int> size_deciles(std::span<const double> values);

struct CellTest {
  std::string test;
  /// Cell or model the test compares against.
  std::string against;
  RankTestResult absolute;
  RankTestResult signed_errors;
};

struct EvalReport {
  std::string key;
  std::string cell;
  ModelTag model = ModelTag::Rnn;
  Horizon horizon = Horizon::Annual;
  std::size_t n = 0;
  double mapd = 0.0;
  double mpd = 0.0;
  std::optional<CellTest> test;
};

struct PartitionConfig {
  Date covid_start = make_date(2020, 2, 18);
  std::vector<ModelTag> models{kAllModels.begin(), kAllModels.end()};
};

/// One report per cell and model; models lacking a forecast in a row skip that row. Tests:
/// all = Wilcoxon of each benchmark against the RNN; quarter = Mann-Whitney Q4 vs Q1;
/// covid = Mann-Whitney during vs pre; coverage = Mann-Whitney uncovered vs covered.
std::vector<EvalReport> partition_evaluate(std::span<const ForecastRow> rows, PartitionKey key, Horizon horizon,
                                           const PartitionConfig& config = {});

struct MatchedPair {
  std::size_t uncovered = 0;
  std::size_t covered = 0;
  double distance = 0.0;
};

/// For every uncovered row, the nearest covered row of the same industry whose distance in
/// standardized (total assets, Tobin's q) is strictly below `limit`. Standardization uses the
/// union of both sets; covered rows may be reused.
std::vector<MatchedPair> match_similar_firms(std::span<const ForecastRow> covered,
                                             std::span<const ForecastRow> uncovered, double limit = 0.01);

struct MatchedCell {
  std::string industry;
  std::size_t n = 0;
  double mapd_uncovered = 0.0;
  double mapd_covered = 0.0;
};

struct MatchedReport {
  Horizon horizon = Horizon::Annual;
  ModelTag model = ModelTag::Rnn;
  std::vector<MatchedPair> pairs;
  /// Per industry, then a final "Total" cell.
  std::vector<MatchedCell> cells;
  RankTestResult wilcoxon;
};

/// Throws DataError when no pair is found.
MatchedReport matched_evaluate(std::span<const ForecastRow> covered, std::span<const ForecastRow> uncovered,
                               Horizon horizon, ModelTag model = ModelTag::Rnn, double limit = 0.01);

void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports);
std::string format_reports_text(std::span<const EvalReport> reports);
void write_sign_csv(std::ostream& out, std::span<const std::pair<ModelTag, SignReport>> reports, Horizon horizon);
std::string format_sign_text(std::span<const std::pair<ModelTag, SignReport>> reports, Horizon horizon);
void write_matched_csv(std::ostream& out, const MatchedReport& report);
std::string format_matched_text(const MatchedReport& report);

}  // namespace epsnet
