// SPDX-License-Identifier: Apache-2.0
#include "epsnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "epsnet/csv.hpp"
#include "epsnet/error.hpp"

namespace epsnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::array<const char*, 13> kMetaColumns{"firm_id",     "fiscal_year", "fiscal_quarter", "report_date", "total_assets",
                                               "tobins_q",    "industry",    "stock_price",    "covered",     "actual_q",
                                               "actual_y",    "prev_q",      "prev_y"};

std::string pct(double fraction) {
  if (!std::isfinite(fraction)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

std::string pad(std::string s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

bool has_prediction(const ForecastRow& r, ModelTag m, Horizon h) { return std::isfinite(r.prediction(m, h)); }

}  // namespace

std::string_view model_name(ModelTag m) {
  switch (m) {
    case ModelTag::Rnn: return "rnn";
    case ModelTag::Analyst: return "analyst";
    case ModelTag::Regression: return "regression";
    case ModelTag::RandomWalk: return "random_walk";
  }
  return "?";
}

std::string_view horizon_name(Horizon h) { return h == Horizon::Annual ? "annual" : "quarterly"; }

Horizon parse_horizon(std::string_view text) {
  if (text == "annual") return Horizon::Annual;
  if (text == "quarterly") return Horizon::Quarterly;
  throw DataError("unknown frequency '" + std::string(text) + "' (expected annual or quarterly)");
}

void ForecastSet::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < kMetaColumns.size(); ++i) out << (i ? "," : "") << kMetaColumns[i];
  for (ModelTag m : kAllModels) out << ',' << model_name(m) << "_q," << model_name(m) << "_y";
  out << '\n';
  for (const auto& r : rows) {
    out << csv::quote_if_needed(r.firm_id) << ',' << r.fiscal_year << ',' << r.fiscal_quarter << ','
        << (r.report_date ? format_date(*r.report_date) : "") << ',' << csv::format_double(r.total_assets) << ','
        << csv::format_double(r.tobins_q) << ',' << csv::quote_if_needed(r.industry) << ','
        << csv::format_double(r.stock_price) << ',' << (r.covered ? 1 : 0) << ',' << csv::format_double(r.actual_q)
        << ',' << csv::format_double(r.actual_y) << ',' << csv::format_double(r.prev_q) << ','
        << csv::format_double(r.prev_y);
    for (std::size_t m = 0; m < 4; ++m)
      out << ',' << csv::format_double(r.pred_q[m]) << ',' << csv::format_double(r.pred_y[m]);
    out << '\n';
  }
}

ForecastSet ForecastSet::read_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::size_t> idx;
  auto need = [&](const std::string& name) {
    const auto c = reader.column(name);
    if (!c) throw SchemaError("forecast file lacks column '" + name + "'");
    idx.push_back(*c);
  };
  for (const char* c : kMetaColumns) need(c);
  for (ModelTag m : kAllModels) {
    need(std::string(model_name(m)) + "_q");
    need(std::string(model_name(m)) + "_y");
  }
  ForecastSet set;
  std::vector<std::string> f;
  while (reader.next(f)) {
    const std::size_t line = reader.line();
    auto field = [&](std::size_t k) -> const std::string& {
      if (idx[k] >= f.size()) throw RowError(line, "too few fields");
      return f[idx[k]];
    };
    auto number = [&](std::size_t k) {
      const auto p = csv::parse_double(field(k));
      if (!p.ok) throw RowError(line, "malformed number in column " + std::string(kMetaColumns.size() > k ? kMetaColumns[k] : "prediction"));
      return p.missing ? kNaN : p.value;
    };
    auto integer = [&](std::size_t k) {
      const double v = number(k);
      if (!std::isfinite(v) || v != std::floor(v)) throw RowError(line, "expected an integer");
      return static_cast<int>(v);
    };
    ForecastRow r;
    r.firm_id = field(0);
    r.fiscal_year = integer(1);
    r.fiscal_quarter = integer(2);
    if (!field(3).empty()) {
      try {
        r.report_date = parse_date(field(3));
      } catch (const DataError& e) {
        throw RowError(line, e.what());
      }
    }
    r.total_assets = number(4);
    r.tobins_q = number(5);
    r.industry = field(6).empty() ? "Other" : field(6);
    r.stock_price = number(7);
    r.covered = integer(8) != 0;
    r.actual_q = number(9);
    r.actual_y = number(10);
    r.prev_q = number(11);
    r.prev_y = number(12);
    for (std::size_t m = 0; m < 4; ++m) {
      r.pred_q[m] = number(13 + 2 * m);
      r.pred_y[m] = number(14 + 2 * m);
    }
    set.rows.push_back(std::move(r));
  }
  return set;
}

void ForecastSet::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(out);
}

ForecastSet ForecastSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path);
  return read_csv(in);
}

double percentage_difference(double actual, double predicted) {
  if (actual == 0.0) throw DataError("percentage difference undefined for actual EPS 0");
  return (actual - predicted) / actual;
}

double median(std::vector<double> v) {
  if (v.empty()) throw DataError("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lower + (upper - lower) / 2.0;
}

ErrorSummary summarize_errors(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) throw ShapeError("actual and predicted lengths differ");
  ErrorSummary s;
  s.n = actual.size();
  if (s.n == 0) {
    s.mapd = s.mpd = kNaN;
    return s;
  }
  std::vector<double> e(s.n), a(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    e[i] = percentage_difference(actual[i], predicted[i]);
    a[i] = std::abs(e[i]);
  }
  s.mpd = median(std::move(e));
  s.mapd = median(std::move(a));
  return s;
}

FilterResult apply_sample_filters(std::span<const ForecastRow> rows, const SampleFilterConfig& config) {
  if (config.models.empty()) throw DataError("sample filter needs at least one model");
  if (!(config.trim >= 0.0 && config.trim < 0.5)) throw DataError("trim fraction must be in [0, 0.5)");
  FilterResult out;
  FilterLog& log = out.log;
  log.input = rows.size();
  std::vector<ForecastRow> kept;
  for (const auto& r : rows) {
    const bool complete = std::isfinite(r.actual(config.horizon)) &&
                          std::all_of(config.models.begin(), config.models.end(),
                                      [&](ModelTag m) { return has_prediction(r, m, config.horizon); });
    if (!complete) {
      ++log.missing_model;
      continue;
    }
    if (r.actual(config.horizon) == 0.0) {
      ++log.zero_actual;
      continue;
    }
    if (!(r.stock_price >= config.penny_threshold)) {
      ++log.penny;
      continue;
    }
    kept.push_back(r);
  }

  const std::size_t n = kept.size();
  const auto k = static_cast<std::size_t>(std::floor(config.trim * static_cast<double>(n) + 1e-9));
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(n * config.models.size());
  for (std::size_t i = 0; i < n; ++i)
    for (ModelTag m : config.models)
      pooled.emplace_back(percentage_difference(kept[i].actual(config.horizon), kept[i].prediction(m, config.horizon)), i);
  std::sort(pooled.begin(), pooled.end());
  std::vector<char> drop(n, 0);
  for (std::size_t j = 0; j < pooled.size() && log.trimmed_low < k; ++j)
    if (!drop[pooled[j].second]) {
      drop[pooled[j].second] = 1;
      ++log.trimmed_low;
    }
  for (std::size_t j = pooled.size(); j-- > 0 && log.trimmed_high < k;)
    if (!drop[pooled[j].second]) {
      drop[pooled[j].second] = 1;
      ++log.trimmed_high;
    }
  for (std::size_t i = 0; i < n; ++i)
    if (!drop[i]) out.rows.push_back(std::move(kept[i]));
  log.survivors = out.rows.size();
  if (out.rows.empty()) throw DataError("sample filters removed every row");
  return out;
}

SignClass sign_classify(double eps, double previous, double threshold) {
  if (previous == 0.0 || !std::isfinite(previous)) throw DataError("sign classification needs a non-zero previous value");
  const double change = (eps - previous) / std::abs(previous);
  if (std::abs(change) < threshold) return SignClass::Neutral;
  return change > 0.0 ? SignClass::Positive : SignClass::Negative;
}

SignReport macro_metrics(const Confusion& c) {
  SignReport r;
  r.confusion = c;
  for (const auto& row : c)
    for (std::size_t v : row) r.n += v;
  if (r.n == 0) throw DataError("empty confusion matrix");
  const auto n = static_cast<double>(r.n);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto tp = static_cast<double>(c[k][k]);
    double actual = 0.0;
    double predicted = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      actual += static_cast<double>(c[k][j]);
      predicted += static_cast<double>(c[j][k]);
    }
    r.precision[k] = predicted > 0.0 ? tp / predicted : 0.0;
    r.recall[k] = actual > 0.0 ? tp / actual : 0.0;
    const double pr = r.precision[k] + r.recall[k];
    r.f1[k] = pr > 0.0 ? 2.0 * r.precision[k] * r.recall[k] / pr : 0.0;
    const double tn = n - actual - predicted + tp;
    r.average_accuracy += (tp + tn) / n / 3.0;
  }
  r.macro_precision = (r.precision[0] + r.precision[1] + r.precision[2]) / 3.0;
  r.macro_recall = (r.recall[0] + r.recall[1] + r.recall[2]) / 3.0;
  r.macro_f1 = (r.f1[0] + r.f1[1] + r.f1[2]) / 3.0;
  const double pr = r.macro_precision + r.macro_recall;
  r.macro_f1_harmonic = pr > 0.0 ? 2.0 * r.macro_precision * r.macro_recall / pr : 0.0;
  return r;
}

SignReport sign_report(std::span<const ForecastRow> rows, ModelTag model, Horizon horizon, double threshold) {
  Confusion c{};
  for (const auto& r : rows) {
    const double prev = r.previous(horizon);
    const double pred = r.prediction(model, horizon);
    if (prev == 0.0 || !std::isfinite(prev) || !std::isfinite(pred) || !std::isfinite(r.actual(horizon))) continue;
    const auto a = static_cast<std::size_t>(sign_classify(r.actual(horizon), prev, threshold));
    const auto p = static_cast<std::size_t>(sign_classify(pred, prev, threshold));
    ++c[a][p];
  }
  return macro_metrics(c);
}

std::string_view partition_name(PartitionKey key) {
  switch (key) {
    case PartitionKey::All: return "all";
    case PartitionKey::Quarter: return "quarter";
    case PartitionKey::SizeDecile: return "size";
    case PartitionKey::Industry: return "industry";
    case PartitionKey::Year: return "year";
    case PartitionKey::Covid: return "covid";
    case PartitionKey::Coverage: return "coverage";
  }
  return "?";
}

PartitionKey parse_partition_key(std::string_view text) {
  for (auto k : {PartitionKey::All, PartitionKey::Quarter, PartitionKey::SizeDecile, PartitionKey::Industry,
                 PartitionKey::Year, PartitionKey::Covid, PartitionKey::Coverage})
    if (partition_name(k) == text) return k;
  if (text == "size_decile") return PartitionKey::SizeDecile;
  throw DataError("unknown slice '" + std::string(text) + "'");
}

std::vector<int> size_deciles(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::array<double, 9> bounds{};
  for (std::size_t k = 1; k <= 9 && n > 0; ++k) {
    const auto rank = static_cast<std::size_t>(std::ceil(static_cast<double>(k * n) / 10.0 - 1e-9));
    bounds[k - 1] = sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
  }
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = 1 + static_cast<int>(std::count_if(bounds.begin(), bounds.end(), [&](double b) { return values[i] > b; }));
  return out;
}

namespace {

struct Cell {
  std::string label;
  std::vector<std::size_t> rows;
};

std::vector<Cell> make_cells(std::span<const ForecastRow> rows, PartitionKey key, const PartitionConfig& config) {
  std::vector<Cell> cells;
  auto fixed = [&](std::initializer_list<std::string> labels) {
    for (const auto& l : labels) cells.push_back({l, {}});
  };
  switch (key) {
    case PartitionKey::All:
      fixed({"all"});
      for (std::size_t i = 0; i < rows.size(); ++i) cells[0].rows.push_back(i);
      break;
    case PartitionKey::Quarter:
      fixed({"Q1", "Q2", "Q3", "Q4"});
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int q = rows[i].fiscal_quarter;
        if (q < 1 || q > 4) throw DataError("fiscal quarter out of range in forecast row");
        cells[static_cast<std::size_t>(q - 1)].rows.push_back(i);
      }
      break;
    case PartitionKey::SizeDecile: {
      for (int d = 1; d <= 10; ++d) cells.push_back({"D" + std::to_string(d), {}});
      std::vector<double> assets(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) assets[i] = rows[i].total_assets;
      const auto dec = size_deciles(assets);
      for (std::size_t i = 0; i < rows.size(); ++i) cells[static_cast<std::size_t>(dec[i] - 1)].rows.push_back(i);
      break;
    }
    case PartitionKey::Industry:
    case PartitionKey::Year: {
      std::map<std::string, std::vector<std::size_t>> groups;
      std::map<int, std::vector<std::size_t>> years;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (key == PartitionKey::Industry) groups[rows[i].industry.empty() ? "Other" : rows[i].industry].push_back(i);
        else years[rows[i].fiscal_year].push_back(i);
      }
      for (auto& [label, idx] : groups) cells.push_back({label, std::move(idx)});
      for (auto& [year, idx] : years) cells.push_back({std::to_string(year), std::move(idx)});
      break;
    }
    case PartitionKey::Covid: {
      fixed({"pre", "during"});
      std::vector<std::size_t> undated;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].report_date) undated.push_back(i);
        else cells[*rows[i].report_date >= config.covid_start ? 1 : 0].rows.push_back(i);
      }
      if (!undated.empty()) cells.push_back({"undated", std::move(undated)});
      break;
    }
    case PartitionKey::Coverage:
      fixed({"covered", "uncovered"});
      for (std::size_t i = 0; i < rows.size(); ++i) cells[rows[i].covered ? 0 : 1].rows.push_back(i);
      break;
  }
  return cells;
}

struct Errors {
  std::vector<double> signed_e;
  std::vector<double> abs_e;
};

Errors cell_errors(std::span<const ForecastRow> rows, const std::vector<std::size_t>& idx, ModelTag m, Horizon h) {
  Errors e;
  for (std::size_t i : idx) {
    const auto& r = rows[i];
    if (!has_prediction(r, m, h) || !std::isfinite(r.actual(h)) || r.actual(h) == 0.0) continue;
    const double d = percentage_difference(r.actual(h), r.prediction(m, h));
    e.signed_e.push_back(d);
    e.abs_e.push_back(std::abs(d));
  }
  return e;
}

}  // namespace

std::vector<EvalReport> partition_evaluate(std::span<const ForecastRow> rows, PartitionKey key, Horizon horizon,
                                           const PartitionConfig& config) {
  const auto cells = make_cells(rows, key, config);
  std::vector<EvalReport> out;
  for (const auto& cell : cells) {
    for (ModelTag m : config.models) {
      EvalReport r;
      r.key = partition_name(key);
      r.cell = cell.label;
      r.model = m;
      r.horizon = horizon;
      const Errors e = cell_errors(rows, cell.rows, m, horizon);
      r.n = e.abs_e.size();
      if (r.n > 0) {
        r.mapd = median(e.abs_e);
        r.mpd = median(e.signed_e);
      } else {
        r.mapd = r.mpd = kNaN;
      }
      out.push_back(std::move(r));
    }
  }

  auto mann_whitney_between = [&](const std::string& target, const std::string& reference) {
    const auto t = std::find_if(cells.begin(), cells.end(), [&](const Cell& c) { return c.label == target; });
    const auto ref = std::find_if(cells.begin(), cells.end(), [&](const Cell& c) { return c.label == reference; });
    for (auto& r : out) {
      if (r.cell != target) continue;
      const Errors a = cell_errors(rows, t->rows, r.model, horizon);
      const Errors b = cell_errors(rows, ref->rows, r.model, horizon);
      if (a.abs_e.empty() || b.abs_e.empty()) continue;
      r.test = CellTest{"mann_whitney_u", reference, mann_whitney_u(a.abs_e, b.abs_e),
                        mann_whitney_u(a.signed_e, b.signed_e)};
    }
  };

  switch (key) {
    case PartitionKey::All: {
      // Paired on rows where both models forecast.
      for (auto& r : out) {
        if (r.model == ModelTag::Rnn) continue;
        std::vector<double> da, ds;
        for (const auto& row : rows) {
          if (!has_prediction(row, r.model, horizon) || !has_prediction(row, ModelTag::Rnn, horizon) ||
              row.actual(horizon) == 0.0)
            continue;
          const double eb = percentage_difference(row.actual(horizon), row.prediction(r.model, horizon));
          const double en = percentage_difference(row.actual(horizon), row.prediction(ModelTag::Rnn, horizon));
          da.push_back(std::abs(eb) - std::abs(en));
          ds.push_back(eb - en);
        }
        if (da.empty()) continue;
        r.test = CellTest{"wilcoxon_signed_rank", "rnn", wilcoxon_signed_rank(da), wilcoxon_signed_rank(ds)};
      }
      break;
    }
    case PartitionKey::Quarter: mann_whitney_between("Q4", "Q1"); break;
    case PartitionKey::Covid: mann_whitney_between("during", "pre"); break;
    case PartitionKey::Coverage: mann_whitney_between("uncovered", "covered"); break;
    default: break;
  }
  return out;
}

std::vector<MatchedPair> match_similar_firms(std::span<const ForecastRow> covered,
                                             std::span<const ForecastRow> uncovered, double limit) {
  if (covered.empty() || uncovered.empty()) throw DataError("matching needs covered and uncovered rows");
  double ma = 0.0, mq = 0.0;
  const auto total = static_cast<double>(covered.size() + uncovered.size());
  for (auto set : {covered, uncovered})
    for (const auto& r : set) {
      ma += r.total_assets / total;
      mq += r.tobins_q / total;
    }
  double va = 0.0, vq = 0.0;
  for (auto set : {covered, uncovered})
    for (const auto& r : set) {
      va += (r.total_assets - ma) * (r.total_assets - ma) / total;
      vq += (r.tobins_q - mq) * (r.tobins_q - mq) / total;
    }
  const double sa = va > 0.0 ? std::sqrt(va) : 1.0;
  const double sq = vq > 0.0 ? std::sqrt(vq) : 1.0;

  struct Point {
    double a, q;
    std::size_t index;
  };
  std::map<std::string, std::vector<Point>> by_industry;
  for (std::size_t i = 0; i < covered.size(); ++i)
    by_industry[covered[i].industry].push_back({(covered[i].total_assets - ma) / sa, (covered[i].tobins_q - mq) / sq, i});
  for (auto& [_, pts] : by_industry)
    std::sort(pts.begin(), pts.end(), [](const Point& x, const Point& y) { return x.a < y.a || (x.a == y.a && x.index < y.index); });

  std::vector<MatchedPair> pairs;
  for (std::size_t u = 0; u < uncovered.size(); ++u) {
    const auto it = by_industry.find(uncovered[u].industry);
    if (it == by_industry.end()) continue;
    const double a = (uncovered[u].total_assets - ma) / sa;
    const double q = (uncovered[u].tobins_q - mq) / sq;
    const auto& pts = it->second;
    auto lo = std::lower_bound(pts.begin(), pts.end(), a - limit, [](const Point& p, double v) { return p.a < v; });
    double best = limit;
    std::optional<std::size_t> best_index;
    for (auto p = lo; p != pts.end() && p->a < a + limit; ++p) {
      const double d = std::hypot(p->a - a, p->q - q);
      if (d < best || (d == best && best_index && p->index < *best_index)) {
        best = d;
        best_index = p->index;
      }
    }
    if (best_index) pairs.push_back({u, *best_index, best});
  }
  return pairs;
}

MatchedReport matched_evaluate(std::span<const ForecastRow> covered, std::span<const ForecastRow> uncovered,
                               Horizon horizon, ModelTag model, double limit) {
  MatchedReport rep;
  rep.horizon = horizon;
  rep.model = model;
  auto usable = [&](const ForecastRow& r) {
    return has_prediction(r, model, horizon) && std::isfinite(r.actual(horizon)) && r.actual(horizon) != 0.0;
  };
  std::vector<ForecastRow> cov, unc;
  for (const auto& r : covered)
    if (usable(r)) cov.push_back(r);
  for (const auto& r : uncovered)
    if (usable(r)) unc.push_back(r);
  if (cov.empty() || unc.empty()) throw DataError("matched analysis needs covered and uncovered rows with forecasts");
  rep.pairs = match_similar_firms(cov, unc, limit);
  if (rep.pairs.empty()) throw DataError("no similar covered firm found for any uncovered row");

  auto err = [&](const ForecastRow& r) { return std::abs(percentage_difference(r.actual(horizon), r.prediction(model, horizon))); };
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<double> all_u, all_c;
  for (const auto& p : rep.pairs) {
    const double eu = err(unc[p.uncovered]);
    const double ec = err(cov[p.covered]);
    auto& g = groups[unc[p.uncovered].industry];
    g.first.push_back(eu);
    g.second.push_back(ec);
    all_u.push_back(eu);
    all_c.push_back(ec);
  }
  for (const auto& [industry, g] : groups) rep.cells.push_back({industry, g.first.size(), median(g.first), median(g.second)});
  rep.cells.push_back({"Total", all_u.size(), median(all_u), median(all_c)});
  rep.wilcoxon = wilcoxon_signed_rank(all_u, all_c);
  return rep;
}

void write_reports_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "key,cell,horizon,model,n,mapd_pct,mpd_pct,test,against,statistic_abs,p_abs,statistic_signed,p_signed\n";
  for (const auto& r : reports) {
    out << r.key << ',' << csv::quote_if_needed(r.cell) << ',' << horizon_name(r.horizon) << ',' << model_name(r.model)
        << ',' << r.n << ',' << csv::format_double(100.0 * r.mapd) << ',' << csv::format_double(100.0 * r.mpd);
    if (r.test) {
      out << ',' << r.test->test << ',' << csv::quote_if_needed(r.test->against) << ','
          << csv::format_double(r.test->absolute.statistic) << ',' << csv::format_double(r.test->absolute.p_value) << ','
          << csv::format_double(r.test->signed_errors.statistic) << ','
          << csv::format_double(r.test->signed_errors.p_value);
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
}

std::string format_reports_text(std::span<const EvalReport> reports) {
  std::ostringstream os;
  std::vector<ModelTag> models;
  std::vector<std::string> cells;
  for (const auto& r : reports) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);
  }
  if (reports.empty()) return "(no reports)\n";
  os << horizon_name(reports.front().horizon) << " EPS, partition: " << reports.front().key << '\n';
  os << pad("cell", 14, true);
  for (ModelTag m : models) os << pad(std::string(model_name(m)) + " n", 16) << pad("MAPD", 10) << pad("MPD", 10);
  os << '\n';
  auto find = [&](const std::string& cell, ModelTag m) -> const EvalReport* {
    for (const auto& r : reports)
      if (r.cell == cell && r.model == m) return &r;
    return nullptr;
  };
  for (const auto& c : cells) {
    os << pad(c, 14, true);
    for (ModelTag m : models) {
      const auto* r = find(c, m);
      os << pad(r ? std::to_string(r->n) : "-", 16) << pad(r ? pct(r->mapd) : "-", 10) << pad(r ? pct(r->mpd) : "-", 10);
    }
    os << '\n';
  }
  for (const auto& c : cells) {
    bool any = false;
    for (ModelTag m : models)
      if (const auto* r = find(c, m); r && r->test) any = true;
    if (!any) continue;
    std::string label = "p " + c;
    for (ModelTag m : models)
      if (const auto* r = find(c, m); r && r->test) {
        label += " vs " + r->test->against;
        break;
      }
    os << pad(label, 14, true);
    for (ModelTag m : models) {
      const auto* r = find(c, m);
      os << pad("", 16) << pad(r && r->test ? pct(r->test->absolute.p_value) : "-", 10)
         << pad(r && r->test ? pct(r->test->signed_errors.p_value) : "-", 10);
    }
    os << '\n';
  }
  return os.str();
}

void write_sign_csv(std::ostream& out, std::span<const std::pair<ModelTag, SignReport>> reports, Horizon horizon) {
  out << "horizon,model,n,average_accuracy,macro_precision,macro_recall,macro_f1,macro_f1_harmonic,"
         "c_neg_neg,c_neg_neu,c_neg_pos,c_neu_neg,c_neu_neu,c_neu_pos,c_pos_neg,c_pos_neu,c_pos_pos\n";
  for (const auto& [m, r] : reports) {
    out << horizon_name(horizon) << ',' << model_name(m) << ',' << r.n << ',' << csv::format_double(r.average_accuracy)
        << ',' << csv::format_double(r.macro_precision) << ',' << csv::format_double(r.macro_recall) << ','
        << csv::format_double(r.macro_f1) << ',' << csv::format_double(r.macro_f1_harmonic);
    for (const auto& row : r.confusion)
      for (std::size_t v : row) out << ',' << v;
    out << '\n';
  }
}

std::string format_sign_text(std::span<const std::pair<ModelTag, SignReport>> reports, Horizon horizon) {
  std::ostringstream os;
  os << horizon_name(horizon) << " sign prediction\n"
     << pad("model", 14, true) << pad("n", 8) << pad("avg acc", 10) << pad("macro P", 10) << pad("macro R", 10)
     << pad("macro F1", 10) << '\n';
  for (const auto& [m, r] : reports)
    os << pad(std::string(model_name(m)), 14, true) << pad(std::to_string(r.n), 8) << pad(pct(r.average_accuracy), 10)
       << pad(pct(r.macro_precision), 10) << pad(pct(r.macro_recall), 10) << pad(pct(r.macro_f1), 10) << '\n';
  return os.str();
}

void write_matched_csv(std::ostream& out, const MatchedReport& report) {
  out << "horizon,model,industry,n,mapd_uncovered_pct,mapd_covered_pct,wilcoxon_statistic,wilcoxon_p\n";
  for (const auto& c : report.cells) {
    out << horizon_name(report.horizon) << ',' << model_name(report.model) << ',' << csv::quote_if_needed(c.industry)
        << ',' << c.n << ',' << csv::format_double(100.0 * c.mapd_uncovered) << ','
        << csv::format_double(100.0 * c.mapd_covered);
    if (c.industry == "Total")
      out << ',' << csv::format_double(report.wilcoxon.statistic) << ',' << csv::format_double(report.wilcoxon.p_value);
    else
      out << ",,";
    out << '\n';
  }
}

std::string format_matched_text(const MatchedReport& report) {
  std::ostringstream os;
  os << horizon_name(report.horizon) << " EPS, " << model_name(report.model) << ", uncovered vs similar covered\n"
     << pad("industry", 24, true) << pad("n", 8) << pad("uncovered", 12) << pad("covered", 12) << '\n';
  for (const auto& c : report.cells)
    os << pad(c.industry, 24, true) << pad(std::to_string(c.n), 8) << pad(pct(c.mapd_uncovered), 12)
       << pad(pct(c.mapd_covered), 12) << '\n';
  os << pad("Wilcoxon p", 24, true) << pad("", 8) << pad(pct(report.wilcoxon.p_value), 12) << '\n';
  return os.str();
}

}  // namespace epsnet
