// SPDX-License-Identifier: Apache-2.0
#include "epsnet/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <tuple>

#include "epsnet/csv.hpp"
#include "epsnet/error.hpp"

namespace epsnet {

bool QuarterRecord::operator==(const QuarterRecord& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return firm_id == o.firm_id && fiscal_year == o.fiscal_year && fiscal_quarter == o.fiscal_quarter &&
         frequency == o.frequency && report_date == o.report_date && same(eps, o.eps) &&
         same(total_assets, o.total_assets) && same(book_equity, o.book_equity) &&
         same(shares_outstanding, o.shares_outstanding) && same(dividends_total, o.dividends_total) &&
         same(accruals_total, o.accruals_total) && same(stock_price, o.stock_price) && industry == o.industry &&
         same(analyst_q_eps, o.analyst_q_eps) && same(analyst_y_eps, o.analyst_y_eps) &&
         history_only == o.history_only;
}

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path);
  return in;
}

struct RowParser {
  std::size_t line;
  std::vector<std::string> missing;
  std::vector<std::string> malformed;

  double number(const std::string& text, const std::string& field) {
    const auto p = csv::parse_double(text);
    if (!p.ok) malformed.push_back(field);
    if (p.missing) missing.push_back(field);
    return p.ok ? p.value : kMissing;
  }

  std::optional<int> integer(const std::string& text, const std::string& field) {
    if (text.empty()) {
      missing.push_back(field);
      return std::nullopt;
    }
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      malformed.push_back(field);
      return std::nullopt;
    }
    return v;
  }

  std::optional<Date> date(const std::string& text, const std::string& field) {
    if (text.empty()) {
      missing.push_back(field);
      return std::nullopt;
    }
    try {
      return parse_date(text);
    } catch (const DataError&) {
      malformed.push_back(field);
      return std::nullopt;
    }
  }
};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

bool finite_inputs(const QuarterRecord& r) {
  return std::isfinite(r.eps) && std::isfinite(r.total_assets) && std::isfinite(r.book_equity) &&
         std::isfinite(r.shares_outstanding) && std::isfinite(r.dividends_total) &&
         std::isfinite(r.accruals_total) && std::isfinite(r.stock_price) && r.report_date.has_value();
}

auto fiscal_key(const QuarterRecord& r) {
  return std::make_tuple(r.fiscal_year.value_or(0), r.fiscal_quarter.value_or(0));
}

}  // namespace

QuarterSchema QuarterSchema::from_overrides(const std::map<std::string, std::string>& kv) {
  QuarterSchema s;
  const QuarterSchema defaults;
  for (std::size_t i = 0; i < kQuarterFieldCount; ++i) {
    auto it = kv.find("column." + defaults.columns[i]);
    if (it != kv.end()) s.columns[i] = it->second;
  }
  return s;
}

LoadResult<QuarterRecord> load_quarter_panel(const std::string& path, const QuarterSchema& schema) {
  auto in = open_or_throw(path);
  return read_quarter_panel(in, schema);
}

LoadResult<QuarterRecord> read_quarter_panel(std::istream& in, const QuarterSchema& schema) {
  csv::Reader reader(in);
  std::array<std::optional<std::size_t>, kQuarterFieldCount> col;
  std::vector<std::string> absent;
  for (std::size_t i = 0; i < kQuarterFieldCount; ++i) {
    col[i] = reader.column(schema.columns[i]);
    if (!col[i] && !QuarterSchema::is_optional(static_cast<QuarterField>(i))) absent.push_back(schema.columns[i]);
  }
  if (!absent.empty()) throw SchemaError("missing mandatory column(s): " + join(absent));

  auto get = [&](const std::vector<std::string>& f, QuarterField which) -> const std::string& {
    static const std::string empty;
    const auto& c = col[static_cast<std::size_t>(which)];
    return c ? f[*c] : empty;
  };
  auto name = [&](QuarterField which) -> const std::string& { return schema.name(which); };

  LoadResult<QuarterRecord> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    RowParser p{reader.line(), {}, {}};
    QuarterRecord r;
    r.firm_id = get(f, QuarterField::FirmId);
    if (r.firm_id.empty()) p.malformed.push_back(name(QuarterField::FirmId));
    const std::string& freq = get(f, QuarterField::Frequency);
    if (freq == "A" || freq == "annual") {
      r.frequency = Frequency::Annual;
    } else if (!(freq.empty() || freq == "Q" || freq == "quarterly")) {
      p.malformed.push_back(name(QuarterField::Frequency));
    }
    r.fiscal_year = p.integer(get(f, QuarterField::FiscalYear), name(QuarterField::FiscalYear));
    const std::string& q = get(f, QuarterField::FiscalQuarter);
    if (!(q.empty() && r.frequency == Frequency::Annual)) {
      r.fiscal_quarter = p.integer(q, name(QuarterField::FiscalQuarter));
      if (r.fiscal_quarter && (*r.fiscal_quarter < 1 || *r.fiscal_quarter > 4))
        p.malformed.push_back(name(QuarterField::FiscalQuarter));
    }
    r.report_date = p.date(get(f, QuarterField::ReportDate), name(QuarterField::ReportDate));
    r.eps = p.number(get(f, QuarterField::Eps), name(QuarterField::Eps));
    r.total_assets = p.number(get(f, QuarterField::TotalAssets), name(QuarterField::TotalAssets));
    r.book_equity = p.number(get(f, QuarterField::BookEquity), name(QuarterField::BookEquity));
    r.shares_outstanding = p.number(get(f, QuarterField::SharesOutstanding), name(QuarterField::SharesOutstanding));
    r.dividends_total = p.number(get(f, QuarterField::DividendsTotal), name(QuarterField::DividendsTotal));
    r.accruals_total = p.number(get(f, QuarterField::AccrualsTotal), name(QuarterField::AccrualsTotal));
    r.stock_price = p.number(get(f, QuarterField::StockPrice), name(QuarterField::StockPrice));
    const std::string& industry = get(f, QuarterField::Industry);
    r.industry = industry.empty() ? "Other" : industry;
    // Analyst columns are optional per row; absence is not an issue.
    RowParser analyst{reader.line(), {}, {}};
    r.analyst_q_eps = analyst.number(get(f, QuarterField::AnalystQEps), name(QuarterField::AnalystQEps));
    r.analyst_y_eps = analyst.number(get(f, QuarterField::AnalystYEps), name(QuarterField::AnalystYEps));
    p.malformed.insert(p.malformed.end(), analyst.malformed.begin(), analyst.malformed.end());

    if (!p.malformed.empty()) {
      out.issues.push_back({p.line, RowIssue::Kind::Malformed, p.malformed,
                            RowError(p.line, "unparseable value in " + join(p.malformed)).what()});
      ++out.rejected_rows;
      continue;
    }
    if (!p.missing.empty()) {
      out.issues.push_back({p.line, RowIssue::Kind::MissingValue, p.missing,
                            RowError(p.line, "empty value in " + join(p.missing)).what()});
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

void write_quarter_panel(std::ostream& out, std::span<const QuarterRecord> records) {
  const QuarterSchema s;
  for (std::size_t i = 0; i < kQuarterFieldCount; ++i) out << (i ? "," : "") << s.columns[i];
  out << '\n';
  for (const auto& r : records) {
    out << csv::quote_if_needed(r.firm_id) << ',' << (r.fiscal_year ? std::to_string(*r.fiscal_year) : "") << ','
        << (r.fiscal_quarter ? std::to_string(*r.fiscal_quarter) : "") << ','
        << (r.report_date ? format_date(*r.report_date) : "") << ',' << csv::format_double(r.eps) << ','
        << csv::format_double(r.total_assets) << ',' << csv::format_double(r.book_equity) << ','
        << csv::format_double(r.shares_outstanding) << ',' << csv::format_double(r.dividends_total) << ','
        << csv::format_double(r.accruals_total) << ',' << csv::format_double(r.stock_price) << ','
        << (r.frequency == Frequency::Annual ? "A" : "Q") << ',' << csv::quote_if_needed(r.industry) << ','
        << csv::format_double(r.analyst_q_eps) << ',' << csv::format_double(r.analyst_y_eps) << '\n';
  }
}

namespace {

constexpr std::array<const char*, 8> kMarketColumns{"firm_id",         "date",       "stock_return",
                                                    "volume_per_share", "market_return", "vol_index_level",
                                                    "tobins_q",        "risk_free_rate"};

}  // namespace

LoadResult<DailyMarketRecord> load_market_panel(const std::string& path) {
  auto in = open_or_throw(path);
  return read_market_panel(in);
}

LoadResult<DailyMarketRecord> read_market_panel(std::istream& in) {
  csv::Reader reader(in);
  std::array<std::size_t, kMarketColumns.size()> col{};
  std::vector<std::string> absent;
  for (std::size_t i = 0; i < kMarketColumns.size(); ++i) {
    auto c = reader.column(kMarketColumns[i]);
    if (!c) absent.emplace_back(kMarketColumns[i]);
    col[i] = c.value_or(0);
  }
  if (!absent.empty()) throw SchemaError("missing mandatory column(s): " + join(absent));

  LoadResult<DailyMarketRecord> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    RowParser p{reader.line(), {}, {}};
    DailyMarketRecord r;
    r.firm_id = f[col[0]];
    if (r.firm_id.empty()) p.missing.emplace_back(kMarketColumns[0]);
    auto d = p.date(f[col[1]], kMarketColumns[1]);
    double* dst[] = {&r.stock_return, &r.volume_per_share, &r.market_return,
                     &r.vol_index_level, &r.tobins_q, &r.risk_free_rate};
    for (std::size_t i = 0; i < 6; ++i) *dst[i] = p.number(f[col[i + 2]], kMarketColumns[i + 2]);
    if (!p.missing.empty() || !p.malformed.empty()) {
      auto fields = p.malformed;
      fields.insert(fields.end(), p.missing.begin(), p.missing.end());
      out.issues.push_back({p.line, p.malformed.empty() ? RowIssue::Kind::MissingValue : RowIssue::Kind::Malformed,
                            fields, RowError(p.line, "invalid market row: " + join(fields)).what()});
      ++out.rejected_rows;
      continue;
    }
    r.date = *d;
    out.records.push_back(std::move(r));
  }
  return out;
}

void write_market_panel(std::ostream& out, std::span<const DailyMarketRecord> records) {
  for (std::size_t i = 0; i < kMarketColumns.size(); ++i) out << (i ? "," : "") << kMarketColumns[i];
  out << '\n';
  for (const auto& r : records) {
    out << csv::quote_if_needed(r.firm_id) << ',' << format_date(r.date) << ',' << csv::format_double(r.stock_return)
        << ',' << csv::format_double(r.volume_per_share) << ',' << csv::format_double(r.market_return) << ','
        << csv::format_double(r.vol_index_level) << ',' << csv::format_double(r.tobins_q) << ','
        << csv::format_double(r.risk_free_rate) << '\n';
  }
}

std::size_t CleanLog::total_removed() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.removed;
  return n;
}

void CleanLog::write_csv(std::ostream& out) const {
  out << "step,num_obs,num_obs_removed\n";
  out << "Input," << input << ",0\n";
  for (const auto& s : steps) out << csv::quote_if_needed(s.name) << ',' << s.remaining << ','
                                << (s.removed ? "-" : "") << s.removed << '\n';
}

std::vector<QuarterRecord> CleanResult::targets() const {
  std::vector<QuarterRecord> out;
  for (const auto& r : records)
    if (!r.history_only) out.push_back(r);
  return out;
}

CleanResult clean_panel(std::span<const QuarterRecord> input) {
  CleanResult result;
  result.log.input = input.size();
  std::vector<QuarterRecord> rs(input.begin(), input.end());
  for (auto& r : rs) r.history_only = false;

  auto step = [&](const char* name, auto&& drop) {
    const std::size_t before = rs.size();
    std::erase_if(rs, drop);
    result.log.steps.push_back({name, rs.size(), before - rs.size()});
  };

  step("Missing Year Or Quarter", [](const QuarterRecord& r) {
    return !r.fiscal_year || (r.frequency == Frequency::Quarterly && !r.fiscal_quarter);
  });
  step("Missing Total Assets Or Weighted Average Common Shares", [](const QuarterRecord& r) {
    return std::isnan(r.total_assets) || std::isnan(r.shares_outstanding) || !(r.shares_outstanding > 0.0);
  });
  step("Missing EPS Or BVE", [](const QuarterRecord& r) { return std::isnan(r.eps) || std::isnan(r.book_equity); });
  step("Remove Yearly Data", [](const QuarterRecord& r) { return r.frequency == Frequency::Annual; });

  // Earliest report date wins; records without a date lose to dated ones; input order breaks ties.
  {
    std::vector<std::size_t> order(rs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = rs[a];
      const auto& rb = rs[b];
      if (ra.firm_id != rb.firm_id) return ra.firm_id < rb.firm_id;
      if (fiscal_key(ra) != fiscal_key(rb)) return fiscal_key(ra) < fiscal_key(rb);
      if (ra.report_date.has_value() != rb.report_date.has_value()) return ra.report_date.has_value();
      return ra.report_date.value_or(Date{}) < rb.report_date.value_or(Date{});
    });
    std::vector<QuarterRecord> kept;
    kept.reserve(rs.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& r = rs[order[k]];
      if (!kept.empty() && kept.back().firm_id == r.firm_id && fiscal_key(kept.back()) == fiscal_key(r)) continue;
      kept.push_back(r);
    }
    result.log.steps.push_back({"Remove Duplicate Quarters", kept.size(), rs.size() - kept.size()});
    rs = std::move(kept);
  }

  step("Remove NaN Or Inf. Obs.", [](const QuarterRecord& r) { return !finite_inputs(r); });

  std::map<std::string, std::size_t> per_firm;
  for (const auto& r : rs) ++per_firm[r.firm_id];
  step("Require >1 Obs. Per Comp.", [&](const QuarterRecord& r) { return per_firm[r.firm_id] < 2; });

  // rs is (firm, year, quarter) ordered; the first record of each firm becomes history only.
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (i == 0 || rs[i].firm_id != rs[i - 1].firm_id) {
      rs[i].history_only = true;
      ++flagged;
    }
  }
  result.log.steps.push_back({"Remove Comp. First Obs.", rs.size() - flagged, flagged});
  result.log.survivors = rs.size() - flagged;
  result.records = std::move(rs);
  return result;
}

SplitDataset chronological_split(std::span<const QuarterRecord> records, SplitFractions fr) {
  if (fr.train < 0 || fr.validation < 0 || fr.test < 0 || std::abs(fr.train + fr.validation + fr.test - 1.0) > 1e-9)
    throw DataError("split fractions must be non-negative and sum to 1");
  std::vector<QuarterRecord> rs;
  for (const auto& r : records) {
    if (r.history_only) continue;
    if (!r.report_date) throw DataError("chronological_split: record without report date for firm " + r.firm_id);
    rs.push_back(r);
  }
  if (rs.empty()) throw DataError("chronological_split: no records");
  std::stable_sort(rs.begin(), rs.end(), [](const QuarterRecord& a, const QuarterRecord& b) {
    return std::tie(*a.report_date, a.firm_id, a.fiscal_year, a.fiscal_quarter) <
           std::tie(*b.report_date, b.firm_id, b.fiscal_year, b.fiscal_quarter);
  });
  const auto n = static_cast<double>(rs.size());
  const auto cut1 = static_cast<std::size_t>(std::llround(fr.train * n));
  const auto cut2 = std::max(cut1, static_cast<std::size_t>(std::llround((fr.train + fr.validation) * n)));
  SplitDataset out;
  out.train.assign(rs.begin(), rs.begin() + static_cast<std::ptrdiff_t>(cut1));
  out.validation.assign(rs.begin() + static_cast<std::ptrdiff_t>(cut1), rs.begin() + static_cast<std::ptrdiff_t>(cut2));
  out.test.assign(rs.begin() + static_cast<std::ptrdiff_t>(cut2), rs.end());
  out.train_end = out.train.empty() ? *rs.front().report_date : *out.train.back().report_date;
  out.validation_end = out.validation.empty() ? out.train_end : *out.validation.back().report_date;
  return out;
}

PanelIndex::PanelIndex(std::span<const QuarterRecord> records) {
  for (const auto& r : records) {
    if (!r.fiscal_year || !r.fiscal_quarter) continue;
    by_firm_[r.firm_id].push_back(r);
  }
  for (auto& [firm, v] : by_firm_)
    std::stable_sort(v.begin(), v.end(),
                     [](const QuarterRecord& a, const QuarterRecord& b) { return fiscal_key(a) < fiscal_key(b); });
}

const QuarterRecord* PanelIndex::find(std::string_view firm, int year, int quarter) const {
  auto it = by_firm_.find(firm);
  if (it == by_firm_.end()) return nullptr;
  const auto key = std::make_tuple(year, quarter);
  auto pos = std::lower_bound(it->second.begin(), it->second.end(), key,
                              [](const QuarterRecord& r, const auto& k) { return fiscal_key(r) < k; });
  if (pos == it->second.end() || fiscal_key(*pos) != key) return nullptr;
  return &*pos;
}

std::span<const QuarterRecord> PanelIndex::firm_records(std::string_view firm) const {
  auto it = by_firm_.find(firm);
  if (it == by_firm_.end()) return {};
  return it->second;
}

std::optional<double> PanelIndex::annual_eps(std::string_view firm, int year) const {
  double sum = 0.0;
  for (int q = 1; q <= 4; ++q) {
    const auto* r = find(firm, year, q);
    if (!r) return std::nullopt;
    sum += r->eps;
  }
  return sum;
}

std::span<const QuarterRecord> PanelIndex::reported_before(std::string_view firm, Date date) const {
  auto all = firm_records(firm);
  // Fiscal order and report order agree on cleaned panels; stop at the first record not before date.
  std::size_t n = 0;
  while (n < all.size() && all[n].report_date && *all[n].report_date < date) ++n;
  return all.subspan(0, n);
}

std::vector<std::string> PanelIndex::firms() const {
  std::vector<std::string> out;
  for (const auto& [firm, v] : by_firm_) out.push_back(firm);
  return out;
}

MarketIndex::MarketIndex(std::span<const DailyMarketRecord> records) {
  for (const auto& r : records) by_firm_[r.firm_id].push_back(r);
  for (auto& [firm, v] : by_firm_)
    std::stable_sort(v.begin(), v.end(),
                     [](const DailyMarketRecord& a, const DailyMarketRecord& b) { return a.date < b.date; });
}

std::span<const DailyMarketRecord> MarketIndex::firm_days(std::string_view firm) const {
  auto it = by_firm_.find(firm);
  if (it == by_firm_.end()) return {};
  return it->second;
}

std::span<const DailyMarketRecord> MarketIndex::window_before(std::string_view firm, Date date,
                                                              std::size_t max_days) const {
  auto days = firm_days(firm);
  auto end = std::lower_bound(days.begin(), days.end(), date,
                              [](const DailyMarketRecord& r, Date d) { return r.date < d; });
  const auto n = static_cast<std::size_t>(end - days.begin());
  const std::size_t take = std::min(n, max_days);
  return days.subspan(n - take, take);
}

}  // namespace epsnet
