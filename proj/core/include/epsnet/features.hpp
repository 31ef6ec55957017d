// SPDX-License-Identifier: Apache-2.0
//
// Model inputs: a 20x6 accounting history (zero padded at the oldest end) and a 10-element
// compressed market vector, plus the winsorize/studentize transform fitted on training data.
#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "epsnet/date.hpp"
#include "epsnet/panel.hpp"

namespace epsnet {

inline constexpr int kWindowLength = 20;
inline constexpr int kAccountingFeatures = 6;
inline constexpr int kMarketFeatures = 10;
inline constexpr int kMarketContinuous = 6;
inline constexpr std::size_t kMarketWindowDays = 63;
inline constexpr double kTradingDaysPerYear = 252.0;

enum AccountingColumn : int {
  kEpsPs = 0,
  kLogTotalAssets = 1,
  kEquityRatio = 2,
  kDividendPs = 3,
  kAccrualsPs = 4,
  kTimeToAnnouncement = 5,
};

enum MarketColumn : int {
  kAvgStockReturn = 0,
  kAvgVolumePs = 1,
  kAvgMarketReturn = 2,
  kAvgDeltaVolIndex = 3,
  kAvgDeltaTobinsQ = 4,
  kPeriodLength = 5,
  kQuarterDummy1 = 6,  // q1..q4 occupy 6..9
};

struct ScaledRow {
  double eps_ps = 0.0;
  double total_assets = 0.0;
  double equity_ratio = 0.0;
  double dividend_ps = 0.0;
  double accruals_ps = 0.0;
};

/// Divides dividends and accruals by shares outstanding; equity ratio = book equity / total assets.
ScaledRow per_share_scale(const QuarterRecord& record);

/// (market equity + book liabilities) / (book equity + book liabilities).
double tobins_q(double market_equity, double book_liabilities, double book_equity);

/// log(1 + |x|) * sign(x)
double signed_log(double x);

struct MarketSummary {
  double avg_daily_stock_return = 0.0;
  double avg_daily_volume_ps = 0.0;
  double avg_daily_market_return = 0.0;
  double avg_daily_delta_vol_index = 0.0;
  double avg_daily_delta_tobins_q = 0.0;
  double period_length = 0.0;
  std::size_t day_count = 0;
};

/// Compresses the last (at most 63) trading days before an announcement.
MarketSummary compress_market_window(std::span<const DailyMarketRecord> days);

struct WindowMeta {
  std::string firm_id;
  Date report_date{};
  int fiscal_year = 0;
  int fiscal_quarter = 0;
  /// Latest date of any data that entered the inputs.
  Date max_input_date{};
};

struct FeatureWindow {
  using AccMatrix = Eigen::Matrix<double, kWindowLength, kAccountingFeatures, Eigen::RowMajor>;
  using MarketVector = Eigen::Matrix<double, kMarketFeatures, 1>;

  AccMatrix acc = AccMatrix::Zero();
  int pad_len = kWindowLength;
  MarketVector market = MarketVector::Zero();
  double target_q_eps = 0.0;
  double target_y_eps = 0.0;
  WindowMeta meta;
  /// Identifier of the FeatureStats used to standardize; empty for raw windows.
  std::string stats_id;
};

struct FeatureMoments {
  std::string name;
  bool log_transform = false;
  double mean = 0.0;
  double std = 0.0;
  /// Winsor bounds on the (log-transformed) scale.
  double lower = 0.0;
  double upper = 0.0;
  bool degenerate = false;

  double apply(double raw) const;
};

struct FeatureStats {
  static constexpr int kFormatVersion = 1;

  std::array<FeatureMoments, kAccountingFeatures> accounting;
  std::array<FeatureMoments, kMarketContinuous> market;
  std::string fitted_on = "train";
  std::size_t accounting_rows = 0;
  std::size_t market_rows = 0;

  /// Stable fingerprint of the serialized statistics.
  std::string id() const;
  std::string to_json() const;
  static FeatureStats from_json(const std::string& text);
  void save(const std::string& path) const;
  static FeatureStats load(const std::string& path);
};

/// Symmetric nearest-rank winsor bounds: with k = ceil(p * n), lower = x_(k), upper = x_(n+1-k).
std::pair<double, double> winsor_bounds(std::vector<double> values, double tail = 0.01);

/// Fits per-feature bounds and population moments over the real (unpadded) rows of raw windows.
FeatureStats fit_feature_stats(std::span<const FeatureWindow> raw_train, std::string fitted_on = "train");

/// Signed-log (selected columns), clamp, studentize. Padded rows stay zero; quarter dummies untouched.
FeatureWindow apply_transforms(const FeatureWindow& raw, const FeatureStats& stats);
std::vector<FeatureWindow> apply_transforms(std::span<const FeatureWindow> raw, const FeatureStats& stats);

struct WindowBuildLog {
  std::size_t built = 0;
  std::size_t no_history = 0;
  std::size_t incomplete_year = 0;
  std::size_t no_market_data = 0;
};

/// One raw window per target announcement. `panel` is the full cleaned panel (history rows
/// included); `targets` selects the announcements.
std::vector<FeatureWindow> build_raw_windows(const PanelIndex& panel, const MarketIndex& market,
                                             std::span<const QuarterRecord> targets, WindowBuildLog* log = nullptr);

std::vector<FeatureWindow> build_windows(const PanelIndex& panel, const MarketIndex& market,
                                         std::span<const QuarterRecord> targets, const FeatureStats& stats,
                                         WindowBuildLog* log = nullptr);

}  // namespace epsnet
