// SPDX-License-Identifier: Apache-2.0
#include "epsnet/benchmarks.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "epsnet/error.hpp"

namespace epsnet {

namespace {

bool usable(const QuarterRecord* r, Date before) {
  return r && r->report_date && *r->report_date < before && std::isfinite(r->eps);
}

std::pair<int, int> previous_quarter(int year, int quarter) {
  return quarter == 1 ? std::pair{year - 1, 4} : std::pair{year, quarter - 1};
}

}  // namespace

BenchmarkPrediction random_walk_predict(const PanelIndex& panel, const QuarterRecord& target) {
  BenchmarkPrediction out;
  if (!target.fiscal_year || !target.fiscal_quarter || !target.report_date) return out;
  const int y = *target.fiscal_year;
  const int q = *target.fiscal_quarter;
  const Date date = *target.report_date;
  if (const auto* same = panel.find(target.firm_id, y - 1, q); usable(same, date)) out.q_eps = same->eps;
  double sum = 0.0;
  for (int k = 1; k <= 4; ++k) {
    const auto* r = panel.find(target.firm_id, y - 1, k);
    if (!usable(r, date)) return out;
    sum += r->eps;
  }
  out.y_eps = sum;
  return out;
}

Eigen::RowVectorXd RegressionState::predictors() const {
  Eigen::RowVectorXd row(kRegressionLags + 4);
  for (int k = 0; k < kRegressionLags; ++k) row(k) = lag_eps[static_cast<std::size_t>(k)];
  row(kRegressionLags) = book_equity_ps;
  row(kRegressionLags + 1) = accruals_ps;
  row(kRegressionLags + 2) = dividends_ps;
  row(kRegressionLags + 3) = 1.0;
  return row;
}

std::optional<RegressionState> regression_state(const PanelIndex& panel, const QuarterRecord& target) {
  if (!target.fiscal_year || !target.fiscal_quarter || !target.report_date) return std::nullopt;
  const int y = *target.fiscal_year;
  const int q = *target.fiscal_quarter;
  const Date date = *target.report_date;
  RegressionState s;
  s.horizon = 5 - q;
  for (int k = 1; k < q; ++k) {
    const auto* r = panel.find(target.firm_id, y, k);
    if (!usable(r, date)) return std::nullopt;
    s.known_sum += r->eps;
  }
  auto [ly, lq] = previous_quarter(y, q);
  const QuarterRecord* latest = nullptr;
  for (int k = 0; k < kRegressionLags; ++k) {
    const auto* r = panel.find(target.firm_id, ly, lq);
    if (!usable(r, date)) return std::nullopt;
    if (k == 0) latest = r;
    s.lag_eps[static_cast<std::size_t>(k)] = r->eps;
    std::tie(ly, lq) = previous_quarter(ly, lq);
  }
  const double shares = latest->shares_outstanding;
  if (!(shares > 0.0) || !std::isfinite(latest->book_equity)) return std::nullopt;
  s.book_equity_ps = latest->book_equity / shares;
  s.accruals_ps = std::isfinite(latest->accruals_total) ? latest->accruals_total / shares : 0.0;
  s.dividends_ps = std::isfinite(latest->dividends_total) ? latest->dividends_total / shares : 0.0;
  return s;
}

RegressionBenchmark fit_regression_benchmark(const PanelIndex& panel, std::span<const QuarterRecord> train_targets,
                                             RegressionFitLog* log) {
  RegressionFitLog local;
  RegressionFitLog& lg = log ? *log : local;
  std::array<std::vector<Eigen::RowVectorXd>, 4> rows;
  std::array<std::vector<double>, 4> ys;
  for (const auto& t : train_targets) {
    const auto state = regression_state(panel, t);
    if (!state) {
      ++lg.skipped_missing_predictors;
      continue;
    }
    double remainder = 0.0;
    bool complete = true;
    for (int k = *t.fiscal_quarter; k <= 4 && complete; ++k) {
      const auto* r = panel.find(t.firm_id, *t.fiscal_year, k);
      if (!r || !std::isfinite(r->eps)) complete = false;
      else remainder += r->eps;
    }
    if (!complete) {
      ++lg.skipped_incomplete_year;
      continue;
    }
    const auto h = static_cast<std::size_t>(state->horizon - 1);
    rows[h].push_back(state->predictors());
    ys[h].push_back(remainder);
  }

  RegressionBenchmark model;
  const std::vector<std::string> names = {"eps_lag1", "eps_lag2", "eps_lag3", "eps_lag4",
                                          "bve_ps", "accruals_ps", "dividends_ps", "const"};
  for (std::size_t h = 0; h < 4; ++h) {
    lg.rows[h] = rows[h].size();
    if (rows[h].size() < names.size())
      throw DataError("regression benchmark: horizon " + std::to_string(h + 1) + " has only " +
                      std::to_string(rows[h].size()) + " rows");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows[h].size()), static_cast<Eigen::Index>(names.size()));
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      X.row(i) = rows[h][static_cast<std::size_t>(i)];
      y(i) = ys[h][static_cast<std::size_t>(i)];
    }
    model.fits[h] = ols(X, y, names);
  }
  return model;
}

BenchmarkPrediction regression_predict(const RegressionBenchmark& model, const RegressionState& state) {
  BenchmarkPrediction out;
  if (state.horizon < 0 || state.horizon > 4) throw DataError("regression horizon out of range");
  if (state.horizon == 0) {
    out.y_eps = state.known_sum;
    return out;
  }
  const auto& fit = model.fits[static_cast<std::size_t>(state.horizon - 1)];
  if (fit.coef.size() != kRegressionLags + 4) throw DataError("regression benchmark is not fitted");
  const double remainder = state.predictors().dot(fit.coef);
  out.q_eps = remainder / state.horizon;
  out.y_eps = state.known_sum + remainder;
  return out;
}

std::string RegressionBenchmark::to_json() const {
  nlohmann::json j;
  j["format"] = "epsnet.regression_benchmark";
  j["version"] = 1;
  j["recipe"] = recipe;
  j["horizons"] = nlohmann::json::array();
  for (std::size_t h = 0; h < 4; ++h) {
    const auto& f = fits[h];
    std::vector<double> coef(f.coef.data(), f.coef.data() + f.coef.size());
    j["horizons"].push_back({{"horizon", h + 1}, {"names", f.names}, {"coef", coef}, {"n", f.n},
                             {"residual_variance", f.residual_variance}, {"condition", f.condition}});
  }
  return j.dump(2);
}

RegressionBenchmark RegressionBenchmark::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "epsnet.regression_benchmark") throw SchemaError("not a regression benchmark");
    RegressionBenchmark m;
    m.recipe = j.at("recipe").get<std::string>();
    const auto& hs = j.at("horizons");
    if (hs.size() != 4) throw SchemaError("regression benchmark needs four horizons");
    for (std::size_t h = 0; h < 4; ++h) {
      auto& f = m.fits[h];
      const auto coef = hs[h].at("coef").get<std::vector<double>>();
      f.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
      f.names = hs[h].at("names").get<std::vector<std::string>>();
      f.n = hs[h].at("n").get<std::size_t>();
      if (!hs[h].at("residual_variance").is_null()) f.residual_variance = hs[h].at("residual_variance").get<double>();
      f.condition = hs[h].at("condition").get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed regression benchmark: ") + e.what());
  }
}

}  // namespace epsnet
