// SPDX-License-Identifier: Apache-2.0
//
// Raw accounting and market panels: CSV ingestion, the cleaning cascade and the
// chronological train/validation/test split.
#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epsnet/date.hpp"

namespace epsnet {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

enum class Frequency { Quarterly, Annual };

/// One firm-quarter accounting observation. Missing numerics are NaN.
struct QuarterRecord {
  std::string firm_id;
  std::optional<int> fiscal_year;
  std::optional<int> fiscal_quarter;  // 1..4
  Frequency frequency = Frequency::Quarterly;
  std::optional<Date> report_date;
  double eps = kMissing;
  double total_assets = kMissing;
  double book_equity = kMissing;
  double shares_outstanding = kMissing;
  double dividends_total = kMissing;
  double accruals_total = kMissing;
  double stock_price = kMissing;
  std::string industry = "Other";
  double analyst_q_eps = kMissing;
  double analyst_y_eps = kMissing;
  /// Set by clean_panel on each firm's first observation: usable as model input, never as a target.
  bool history_only = false;

  /// Field-wise; two missing values compare equal.
  bool operator==(const QuarterRecord& other) const;
};

/// One firm-day market observation.
struct DailyMarketRecord {
  std::string firm_id;
  Date date{};
  double stock_return = 0.0;
  double volume_per_share = 0.0;
  double market_return = 0.0;
  double vol_index_level = 0.0;
  double tobins_q = 0.0;
  double risk_free_rate = 0.0;

  bool operator==(const DailyMarketRecord&) const = default;
};

enum class QuarterField {
  FirmId,
  FiscalYear,
  FiscalQuarter,
  ReportDate,
  Eps,
  TotalAssets,
  BookEquity,
  SharesOutstanding,
  DividendsTotal,
  AccrualsTotal,
  StockPrice,
  Frequency,
  Industry,
  AnalystQEps,
  AnalystYEps,
};
inline constexpr std::size_t kQuarterFieldCount = 15;

/// Maps logical fields to CSV header names. The last four fields are optional columns.
struct QuarterSchema {
  std::array<std::string, kQuarterFieldCount> columns{
      "firm_id",        "fiscal_year",     "fiscal_quarter", "report_date",   "eps",
      "total_assets",   "book_equity",     "shares_outstanding", "dividends_total",
      "accruals_total", "stock_price",     "frequency",      "industry",      "analyst_q_eps",
      "analyst_y_eps"};

  const std::string& name(QuarterField f) const { return columns[static_cast<std::size_t>(f)]; }
  static bool is_optional(QuarterField f) { return static_cast<std::size_t>(f) >= 11; }
  /// Applies `column.<default name> = <header>` overrides.
  static QuarterSchema from_overrides(const std::map<std::string, std::string>& kv);
};

struct RowIssue {
  enum class Kind { MissingValue, Malformed };
  std::size_t line = 0;
  Kind kind = Kind::MissingValue;
  std::vector<std::string> fields;
  std::string message;
};

template <class Record>
struct LoadResult {
  std::vector<Record> records;
  std::vector<RowIssue> issues;
  /// Rows that could not be represented at all and are absent from `records`.
  std::size_t rejected_rows = 0;
};

/// Rows with empty mandatory values are loaded (values NaN / absent) and reported as MissingValue
/// issues; the cleaning cascade decides their fate. Unparseable rows are rejected and reported.
LoadResult<QuarterRecord> load_quarter_panel(const std::string& path, const QuarterSchema& schema = {});
LoadResult<QuarterRecord> read_quarter_panel(std::istream& in, const QuarterSchema& schema = {});
void write_quarter_panel(std::ostream& out, std::span<const QuarterRecord> records);

LoadResult<DailyMarketRecord> load_market_panel(const std::string& path);
LoadResult<DailyMarketRecord> read_market_panel(std::istream& in);
void write_market_panel(std::ostream& out, std::span<const DailyMarketRecord> records);

struct CleanStep {
  std::string name;
  std::size_t remaining = 0;
  std::size_t removed = 0;
};

struct CleanLog {
  std::size_t input = 0;
  std::vector<CleanStep> steps;
  std::size_t survivors = 0;

  std::size_t total_removed() const;
  void write_csv(std::ostream& out) const;
};

struct CleanResult {
  /// Retained records in (firm, year, quarter) order, including history-only first observations.
  std::vector<QuarterRecord> records;
  CleanLog log;

  std::vector<QuarterRecord> targets() const;
};

/// Cleaning cascade. Steps, in execution order: missing year/quarter; missing total assets or
/// shares; missing EPS or book equity; annual records; duplicate quarters (earliest report date
/// wins); non-finite values or missing report date; firms with a single observation; each firm's
/// first observation (kept as history, flagged history_only).
CleanResult clean_panel(std::span<const QuarterRecord> records);

struct SplitFractions {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

struct SplitDataset {
  std::vector<QuarterRecord> train;
  std::vector<QuarterRecord> validation;
  std::vector<QuarterRecord> test;
  Date train_end{};
  Date validation_end{};
};

/// Orders target records by (report_date, firm_id, fiscal_year, fiscal_quarter) and cuts at the
/// rounded cumulative fractions. History-only records are ignored.
SplitDataset chronological_split(std::span<const QuarterRecord> records, SplitFractions fractions = {});

/// Per-firm lookup over a cleaned panel, records ordered by (fiscal_year, fiscal_quarter).
class PanelIndex {
 public:
  explicit PanelIndex(std::span<const QuarterRecord> records);

  const QuarterRecord* find(std::string_view firm, int year, int quarter) const;
  std::span<const QuarterRecord> firm_records(std::string_view firm) const;
  /// Sum of the four quarterly EPS values of a fiscal year, when all four are present.
  std::optional<double> annual_eps(std::string_view firm, int year) const;
  /// Records of `firm` reported strictly before `date`, oldest first.
  std::span<const QuarterRecord> reported_before(std::string_view firm, Date date) const;
  std::vector<std::string> firms() const;

 private:
  std::map<std::string, std::vector<QuarterRecord>, std::less<>> by_firm_;
};

/// Daily market series per firm, date ordered.
class MarketIndex {
 public:
  explicit MarketIndex(std::span<const DailyMarketRecord> records);

  std::span<const DailyMarketRecord> firm_days(std::string_view firm) const;
  /// The last `max_days` records dated strictly before `date`.
  std::span<const DailyMarketRecord> window_before(std::string_view firm, Date date, std::size_t max_days) const;

 private:
  std::map<std::string, std::vector<DailyMarketRecord>, std::less<>> by_firm_;
};

}  // namespace epsnet
