// SPDX-License-Identifier: Apache-2.0
#include "epsnet/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "epsnet/error.hpp"

namespace epsnet {

namespace {

constexpr std::array<const char*, kAccountingFeatures> kAccNames{
    "eps_ps", "log_total_assets", "equity_ratio", "dividend_ps", "accruals_ps", "time_to_announcement_years"};
constexpr std::array<bool, kAccountingFeatures> kAccLog{false, true, false, true, false, false};
constexpr std::array<const char*, kMarketContinuous> kMarketNames{
    "avg_daily_stock_return", "avg_daily_volume_ps", "avg_daily_market_return",
    "avg_daily_delta_vol_index", "avg_daily_delta_tobins_q", "period_length_years"};
constexpr std::array<bool, kMarketContinuous> kMarketLog{false, false, false, true, true, false};

FeatureMoments fit_one(const char* name, bool log_transform, std::vector<double> values) {
  if (values.size() < 2) throw DataError(std::string("fit_feature_stats: fewer than 2 observations for ") + name);
  FeatureMoments m;
  m.name = name;
  m.log_transform = log_transform;
  if (log_transform)
    for (double& v : values) v = signed_log(v);
  auto [lo, hi] = winsor_bounds(values);
  m.lower = lo;
  m.upper = hi;
  double sum = 0.0;
  for (double& v : values) {
    v = std::clamp(v, lo, hi);
    sum += v;
  }
  m.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(values.size()));
  m.degenerate = !(m.std > 0.0);
  return m;
}

nlohmann::json moments_json(const FeatureMoments& m) {
  return {{"name", m.name}, {"log_transform", m.log_transform}, {"mean", m.mean}, {"std", m.std},
          {"lower", m.lower}, {"upper", m.upper}, {"degenerate", m.degenerate}};
}

FeatureMoments moments_from(const nlohmann::json& j) {
  FeatureMoments m;
  m.name = j.at("name").get<std::string>();
  m.log_transform = j.at("log_transform").get<bool>();
  m.mean = j.at("mean").get<double>();
  m.std = j.at("std").get<double>();
  m.lower = j.at("lower").get<double>();
  m.upper = j.at("upper").get<double>();
  m.degenerate = j.at("degenerate").get<bool>();
  return m;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ScaledRow per_share_scale(const QuarterRecord& r) {
  if (!(r.shares_outstanding > 0.0)) throw DataError("per_share_scale: shares outstanding must be positive");
  if (r.total_assets == 0.0) throw DataError("per_share_scale: zero total assets");
  ScaledRow s;
  s.eps_ps = r.eps;
  s.total_assets = r.total_assets;
  s.equity_ratio = r.book_equity / r.total_assets;
  s.dividend_ps = r.dividends_total / r.shares_outstanding;
  s.accruals_ps = r.accruals_total / r.shares_outstanding;
  return s;
}

double tobins_q(double market_equity, double book_liabilities, double book_equity) {
  const double denom = book_equity + book_liabilities;
  if (denom == 0.0) throw DataError("tobins_q: book equity + book liabilities is zero");
  return (market_equity + book_liabilities) / denom;
}

double signed_log(double x) { return std::copysign(std::log1p(std::abs(x)), x); }

MarketSummary compress_market_window(std::span<const DailyMarketRecord> days) {
  if (days.empty()) throw DataError("compress_market_window: no market days");
  if (days.size() > kMarketWindowDays) days = days.last(kMarketWindowDays);
  MarketSummary s;
  s.day_count = days.size();
  const auto n = static_cast<double>(days.size());
  double log_ret = 0.0, volume = 0.0, log_mkt = 0.0;
  for (const auto& d : days) {
    log_ret += std::log1p(d.stock_return);
    volume += d.volume_per_share;
    log_mkt += std::log1p(d.market_return);
  }
  s.avg_daily_stock_return = log_ret / n;
  s.avg_daily_volume_ps = volume / n;
  s.avg_daily_market_return = log_mkt / n;
  s.avg_daily_delta_vol_index = (days.back().vol_index_level - days.front().vol_index_level) / n;
  s.avg_daily_delta_tobins_q = (days.back().tobins_q - days.front().tobins_q) / n;
  s.period_length = n / kTradingDaysPerYear;
  return s;
}

double FeatureMoments::apply(double raw) const {
  double v = log_transform ? signed_log(raw) : raw;
  v = std::clamp(v, lower, upper);
  if (degenerate) return 0.0;
  return (v - mean) / std;
}

std::pair<double, double> winsor_bounds(std::vector<double> values, double tail) {
  if (values.empty()) throw DataError("winsor_bounds: empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  auto k = static_cast<std::size_t>(std::ceil(tail * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, (n + 1) / 2);
  return {values[k - 1], values[n - k]};
}

FeatureStats fit_feature_stats(std::span<const FeatureWindow> raw, std::string fitted_on) {
  std::array<std::vector<double>, kAccountingFeatures> acc;
  std::array<std::vector<double>, kMarketContinuous> mkt;
  for (const auto& w : raw) {
    for (int t = w.pad_len; t < kWindowLength; ++t)
      for (int c = 0; c < kAccountingFeatures; ++c) acc[c].push_back(w.acc(t, c));
    for (int c = 0; c < kMarketContinuous; ++c) mkt[c].push_back(w.market(c));
  }
  FeatureStats s;
  s.fitted_on = std::move(fitted_on);
  s.accounting_rows = acc[0].size();
  s.market_rows = mkt[0].size();
  for (int c = 0; c < kAccountingFeatures; ++c) s.accounting[c] = fit_one(kAccNames[c], kAccLog[c], std::move(acc[c]));
  for (int c = 0; c < kMarketContinuous; ++c) s.market[c] = fit_one(kMarketNames[c], kMarketLog[c], std::move(mkt[c]));
  return s;
}

namespace {

FeatureWindow transform_one(const FeatureWindow& raw, const FeatureStats& stats) {
  FeatureWindow w = raw;
  for (int t = 0; t < kWindowLength; ++t)
    for (int c = 0; c < kAccountingFeatures; ++c)
      w.acc(t, c) = t < raw.pad_len ? 0.0 : stats.accounting[c].apply(raw.acc(t, c));
  for (int c = 0; c < kMarketContinuous; ++c) w.market(c) = stats.market[c].apply(raw.market(c));
  return w;
}

}  // namespace

FeatureWindow apply_transforms(const FeatureWindow& raw, const FeatureStats& stats) {
  FeatureWindow w = transform_one(raw, stats);
  w.stats_id = stats.id();
  return w;
}

std::vector<FeatureWindow> apply_transforms(std::span<const FeatureWindow> raw, const FeatureStats& stats) {
  std::vector<FeatureWindow> out;
  out.reserve(raw.size());
  const std::string id = stats.id();
  for (const auto& w : raw) {
    out.push_back(transform_one(w, stats));
    out.back().stats_id = id;
  }
  return out;
}

std::string FeatureStats::to_json() const {
  nlohmann::json j;
  j["format"] = "epsnet.feature_stats";
  j["version"] = kFormatVersion;
  j["fitted_on"] = fitted_on;
  j["accounting_rows"] = accounting_rows;
  j["market_rows"] = market_rows;
  j["accounting"] = nlohmann::json::array();
  for (const auto& m : accounting) j["accounting"].push_back(moments_json(m));
  j["market"] = nlohmann::json::array();
  for (const auto& m : market) j["market"].push_back(moments_json(m));
  return j.dump(2);
}

FeatureStats FeatureStats::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "epsnet.feature_stats") throw SchemaError("not a feature stats document");
    if (j.at("version").get<int>() != kFormatVersion)
      throw SchemaError("unsupported feature stats version " + std::to_string(j.at("version").get<int>()));
    FeatureStats s;
    s.fitted_on = j.at("fitted_on").get<std::string>();
    s.accounting_rows = j.at("accounting_rows").get<std::size_t>();
    s.market_rows = j.at("market_rows").get<std::size_t>();
    const auto& acc = j.at("accounting");
    const auto& mkt = j.at("market");
    if (acc.size() != kAccountingFeatures || mkt.size() != kMarketContinuous)
      throw SchemaError("feature stats: unexpected feature count");
    for (int c = 0; c < kAccountingFeatures; ++c) s.accounting[c] = moments_from(acc[c]);
    for (int c = 0; c < kMarketContinuous; ++c) s.market[c] = moments_from(mkt[c]);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("feature stats: ") + e.what());
  }
}

std::string FeatureStats::id() const {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json())));
  return buf;
}

void FeatureStats::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_json() << '\n';
}

FeatureStats FeatureStats::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<FeatureWindow> build_raw_windows(const PanelIndex& panel, const MarketIndex& market,
                                             std::span<const QuarterRecord> targets, WindowBuildLog* log) {
  WindowBuildLog local;
  WindowBuildLog& lg = log ? *log : local;
  std::vector<FeatureWindow> out;
  out.reserve(targets.size());
  for (const auto& target : targets) {
    if (!target.report_date || !target.fiscal_year || !target.fiscal_quarter) {
      ++lg.no_history;
      continue;
    }
    const Date report = *target.report_date;
    auto history = panel.reported_before(target.firm_id, report);
    if (history.empty()) {
      ++lg.no_history;
      continue;
    }
    const auto annual = panel.annual_eps(target.firm_id, *target.fiscal_year);
    if (!annual) {
      ++lg.incomplete_year;
      continue;
    }
    auto days = market.window_before(target.firm_id, report, kMarketWindowDays);
    if (days.empty()) {
      ++lg.no_market_data;
      continue;
    }

    FeatureWindow w;
    if (history.size() > static_cast<std::size_t>(kWindowLength)) history = history.last(kWindowLength);
    w.pad_len = kWindowLength - static_cast<int>(history.size());
    Date max_input = days.back().date;
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& h = history[i];
      const auto s = per_share_scale(h);
      const int row = w.pad_len + static_cast<int>(i);
      w.acc(row, kEpsPs) = s.eps_ps;
      w.acc(row, kLogTotalAssets) = s.total_assets;
      w.acc(row, kEquityRatio) = s.equity_ratio;
      w.acc(row, kDividendPs) = s.dividend_ps;
      w.acc(row, kAccrualsPs) = s.accruals_ps;
      w.acc(row, kTimeToAnnouncement) = years_between(*h.report_date, report);
      max_input = std::max(max_input, *h.report_date);
    }
    const auto m = compress_market_window(days);
    w.market(kAvgStockReturn) = m.avg_daily_stock_return;
    w.market(kAvgVolumePs) = m.avg_daily_volume_ps;
    w.market(kAvgMarketReturn) = m.avg_daily_market_return;
    w.market(kAvgDeltaVolIndex) = m.avg_daily_delta_vol_index;
    w.market(kAvgDeltaTobinsQ) = m.avg_daily_delta_tobins_q;
    w.market(kPeriodLength) = m.period_length;
    w.market(kQuarterDummy1 + *target.fiscal_quarter - 1) = 1.0;
    w.target_q_eps = target.eps;
    w.target_y_eps = *annual;
    w.meta = {target.firm_id, report, *target.fiscal_year, *target.fiscal_quarter, max_input};
    out.push_back(std::move(w));
    ++lg.built;
  }
  return out;
}

std::vector<FeatureWindow> build_windows(const PanelIndex& panel, const MarketIndex& market,
                                         std::span<const QuarterRecord> targets, const FeatureStats& stats,
                                         WindowBuildLog* log) {
  const auto raw = build_raw_windows(panel, market, targets, log);
  return apply_transforms(raw, stats);
}

}  // namespace epsnet
