// SPDX-License-Identifier: Apache-2.0
//
// Announcement abnormal returns from a per-firm market model with event-window dummies, and
// the earnings response regression with firm fixed effects and clustered standard errors.
#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epsnet/date.hpp"
#include "epsnet/evaluation.hpp"
#include "epsnet/panel.hpp"

namespace epsnet {

struct MarketDay {
  Date date{};
  /// Stock return minus the risk-free rate.
  double stock_excess = 0.0;
  /// Market return minus the risk-free rate.
  double market_excess = 0.0;
};

std::vector<MarketDay> excess_returns(std::span<const DailyMarketRecord> days);

struct EventAbnormalReturn {
  Date event_date{};
  Date window_start{};
  Date window_end{};
  std::size_t window_days = 0;
  /// Cumulative abnormal return over the window (dummy coefficient times window length).
  double alpha2 = 0.0;
  /// The window overlapped another event's window and shares its dummy.
  bool merged = false;
};

struct MarketModelFit {
  std::string firm_id;
  double alpha0 = 0.0;
  double alpha1 = 0.0;
  std::vector<EventAbnormalReturn> events;
  /// Events whose window does not fit inside the return history.
  std::vector<Date> skipped_events;
  std::size_t observations = 0;
  std::size_t estimation_days = 0;
  double residual_variance = 0.0;
  std::vector<std::string> warnings;
};

struct MarketModelConfig {
  int half_window = 1;
  std::size_t min_estimation_days = 30;
};

/// One OLS per firm: excess return on a constant, the market excess return and one dummy per
/// event window (trading days [k - h, k + h] around the first trading day on or after the
/// event date). Returns nullopt when fewer than `min_estimation_days` non-event days remain.
std::optional<MarketModelFit> fit_market_model(const std::string& firm_id, std::span<const MarketDay> days,
                                               std::span<const Date> event_dates, const MarketModelConfig& config = {});

struct SurpriseObservation {
  std::string firm_id;
  Date event_date{};
  double surprise = 0.0;
  double ln_total_assets = 0.0;
  double tobins_q = 0.0;
  int year = 0;
  int quarter = 0;
  double alpha2 = std::numeric_limits<double>::quiet_NaN();
};

struct ErcSampleLog {
  std::size_t input = 0;
  std::size_t missing_report_date = 0;
  std::size_t not_year_end = 0;
  std::size_t missing_prediction = 0;
  std::size_t zero_prediction = 0;
  std::size_t invalid_size = 0;
  std::size_t kept = 0;
};

/// One observation per announcement for `model`. Annual runs keep only the fiscal-Q4 row of
/// each firm-year (the forecast made with three known quarters, dated at the annual
/// announcement). Throws DataError when nothing remains.
std::vector<SurpriseObservation> select_erc_sample(std::span<const ForecastRow> rows, ModelTag model, Horizon frequency,
                                                   ErcSampleLog* log = nullptr);

struct AbnormalReturnLog {
  std::size_t firms_fitted = 0;
  std::size_t firms_skipped = 0;
  std::size_t events_without_window = 0;
  std::size_t merged_windows = 0;
};

/// Fills alpha2 from per-firm market models; observations without an estimate are removed.
void attach_abnormal_returns(std::vector<SurpriseObservation>& observations, const MarketIndex& market,
                             const MarketModelConfig& config = {}, AbnormalReturnLog* log = nullptr);

enum class ClusterBy { Firm, Year };
std::string_view cluster_name(ClusterBy c);

/// Cluster-robust covariance (bread * meat * bread) times G/(G-1) * (n-1)/(n-k).
Eigen::MatrixXd clustered_covariance(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                     std::span<const std::size_t> cluster, const Eigen::MatrixXd& xtx_inverse);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t = 0.0;
  double p = 1.0;
  std::string stars;
};

struct ErcRegressionResult {
  Horizon frequency = Horizon::Annual;
  ClusterBy cluster = ClusterBy::Firm;
  std::vector<Coefficient> coefficients;
  std::size_t n = 0;
  std::size_t clusters = 0;
  std::size_t firms = 0;
  /// R^2 of the within-firm demeaned regression.
  double r2_within = 0.0;

  const Coefficient& operator[](std::string_view name) const;
};

/// alpha2 on surprise, ln(TA), ln(TA) x surprise, q, q x surprise, year dummies (base = first
/// year) and, for quarterly runs, Q1..Q3 dummies. Every column is demeaned within firm.
/// p-values use a t distribution with G - 1 degrees of freedom.
ErcRegressionResult erc_regression(std::span<const SurpriseObservation> observations, Horizon frequency,
                                   ClusterBy cluster = ClusterBy::Firm);

std::string significance_stars(double p);

void write_coefficients_csv(std::ostream& out, const ErcRegressionResult& result, std::string_view model);
std::string format_coefficients_text(std::span<const std::pair<std::string, ErcRegressionResult>> results);

}  // namespace epsnet
