// SPDX-License-Identifier: Apache-2.0
//
// Synthetic firm panels with known dynamics.
//
//   EPS_t = mu + s_q + rho (EPS_{t-4} - mu - s_q) + shock_t + e_t,   s_q = mu * seasonal[q]
//
// Analyst forecasts are actual * (1 - bias + noise), so the planted bias is the expected
// median percentage difference. Each announcement moves the stock by erc * surprise over the
// three-day window around it, where surprise = (EPS - E[EPS]) / E[EPS] under the process.
// Balance-sheet totals and share counts are in billions; per-share values are in dollars.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "epsnet/date.hpp"
#include "epsnet/event_study.hpp"
#include "epsnet/panel.hpp"

namespace epsnet {

struct SynthConfig {
  std::size_t firms = 200;
  int quarters = 32;
  int start_year = 2012;
  /// Firms enter up to this many quarters after the start.
  int max_entry_offset = 8;

  double mu_mean = 1.0;
  double mu_sd = 0.4;
  double mu_min = 0.3;
  std::array<double, 4> seasonal{-0.2, 0.1, 0.25, -0.15};
  /// Per-firm persistence drawn uniformly from [rho_min, rho_max].
  double rho_min = 0.3;
  double rho_max = 0.9;
  /// Innovation sd as a fraction of mu.
  double noise_sd = 0.1;

  Date crisis_date = make_date(2020, 2, 18);
  /// Fiscal quarters ending on or after crisis_date that receive the shock.
  int crisis_quarters = 2;
  /// Shock as a fraction of mu.
  double crisis_shock = -0.3;

  double analyst_bias = -0.13;
  double analyst_noise = 0.05;
  /// P(covered) = logistic(intercept + slope * standardized log total assets).
  double coverage_intercept = 0.5;
  double coverage_slope = 1.5;

  double market_mean = 0.0004;
  double market_sd = 0.01;
  double risk_free_daily = 0.0001;
  double beta_mean = 1.0;
  double beta_sd = 0.3;
  double idiosyncratic_sd = 0.015;
  double vol_index_mean = 20.0;
  double vol_index_persistence = 0.95;
  double vol_index_sd = 1.0;
  double volume_median = 0.005;

  double erc = 0.06;
  /// Cumulative return, per unit surprise, spread over the trading days before the event window.
  double pre_announcement_drift = 3.0;
  double price_earnings = 15.0;

  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruthRow {
  std::string firm_id;
  int fiscal_year = 0;
  int fiscal_quarter = 0;
  Date report_date{};
  /// First trading day on or after the report date.
  Date event_date{};
  double eps = 0.0;
  double expected_eps = 0.0;
  double surprise = 0.0;
  double planted_abnormal_return = 0.0;
  double mu = 0.0;
  double rho = 0.0;
  double beta = 0.0;
  bool covered = false;
};

struct SynthPanel {
  std::vector<QuarterRecord> quarters;
  std::vector<DailyMarketRecord> market;
  std::vector<GroundTruthRow> truth;

  void write_truth_csv(std::ostream& out) const;
};

/// Deterministic in config (including seed); firms use independent derived streams.
SynthPanel generate_panel(const SynthConfig& config);

/// Surprise observations from the ground truth, one per announcement, with alpha2 left unset.
/// Size and Tobin's q are taken from the announcement record and the last market day before it.
std::vector<SurpriseObservation> planted_surprises(const SynthPanel& panel);

}  // namespace epsnet
