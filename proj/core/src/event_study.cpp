// SPDX-License-Identifier: Apache-2.0
#include "epsnet/event_study.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "epsnet/csv.hpp"
#include "epsnet/error.hpp"
#include "epsnet/linalg.hpp"

namespace epsnet {

std::vector<MarketDay> excess_returns(std::span<const DailyMarketRecord> days) {
  std::vector<MarketDay> out;
  out.reserve(days.size());
  for (const auto& d : days)
    out.push_back({d.date, d.stock_return - d.risk_free_rate, d.market_return - d.risk_free_rate});
  return out;
}

std::optional<MarketModelFit> fit_market_model(const std::string& firm_id, std::span<const MarketDay> days_in,
                                               std::span<const Date> event_dates, const MarketModelConfig& config) {
  if (config.half_window < 0) throw DataError("event half-window must be non-negative");
  std::vector<MarketDay> days(days_in.begin(), days_in.end());
  std::stable_sort(days.begin(), days.end(), [](const MarketDay& a, const MarketDay& b) { return a.date < b.date; });
  const auto T = static_cast<std::ptrdiff_t>(days.size());
  const std::ptrdiff_t h = config.half_window;

  MarketModelFit fit;
  fit.firm_id = firm_id;
  struct Window {
    std::ptrdiff_t start, end;
    std::vector<Date> events;
  };
  std::vector<std::pair<std::ptrdiff_t, Date>> located;
  std::vector<Date> sorted_events(event_dates.begin(), event_dates.end());
  std::sort(sorted_events.begin(), sorted_events.end());
  sorted_events.erase(std::unique(sorted_events.begin(), sorted_events.end()), sorted_events.end());
  for (Date e : sorted_events) {
    const auto it = std::lower_bound(days.begin(), days.end(), e, [](const MarketDay& d, Date v) { return d.date < v; });
    const std::ptrdiff_t k = it - days.begin();
    if (k >= T || k - h < 0 || k + h >= T) {
      fit.skipped_events.push_back(e);
      continue;
    }
    located.emplace_back(k, e);
  }
  std::vector<Window> windows;
  for (const auto& [k, e] : located) {
    if (!windows.empty() && k - h <= windows.back().end) {
      windows.back().end = std::max(windows.back().end, k + h);
      windows.back().events.push_back(e);
    } else {
      windows.push_back({k - h, k + h, {e}});
    }
  }

  std::size_t event_days = 0;
  for (const auto& w : windows) event_days += static_cast<std::size_t>(w.end - w.start + 1);
  fit.observations = days.size();
  fit.estimation_days = days.size() - event_days;
  if (fit.estimation_days < config.min_estimation_days) return std::nullopt;

  const auto p = static_cast<Eigen::Index>(2 + windows.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(T, p);
  Eigen::VectorXd y(T);
  std::vector<std::string> names = {"alpha0", "alpha1"};
  for (std::ptrdiff_t t = 0; t < T; ++t) {
    X(t, 0) = 1.0;
    X(t, 1) = days[static_cast<std::size_t>(t)].market_excess;
    y(t) = days[static_cast<std::size_t>(t)].stock_excess;
  }
  for (std::size_t j = 0; j < windows.size(); ++j) {
    names.push_back("event_" + format_date(windows[j].events.front()));
    for (std::ptrdiff_t t = windows[j].start; t <= windows[j].end; ++t) X(t, static_cast<Eigen::Index>(2 + j)) = 1.0;
  }
  const OlsFit ols_fit = ols(X, y, names);
  fit.alpha0 = ols_fit.coef(0);
  fit.alpha1 = ols_fit.coef(1);
  fit.residual_variance = ols_fit.residual_variance;
  for (std::size_t j = 0; j < windows.size(); ++j) {
    const auto& w = windows[j];
    const auto len = static_cast<std::size_t>(w.end - w.start + 1);
    const bool merged = w.events.size() > 1;
    if (merged)
      fit.warnings.push_back("merged overlapping event windows starting " +
                             format_date(days[static_cast<std::size_t>(w.start)].date));
    for (Date e : w.events)
      fit.events.push_back({e, days[static_cast<std::size_t>(w.start)].date, days[static_cast<std::size_t>(w.end)].date,
                            len, ols_fit.coef(static_cast<Eigen::Index>(2 + j)) * static_cast<double>(len), merged});
  }
  return fit;
}

std::vector<SurpriseObservation> select_erc_sample(std::span<const ForecastRow> rows, ModelTag model, Horizon frequency,
                                                   ErcSampleLog* log) {
  ErcSampleLog local;
  ErcSampleLog& lg = log ? *log : local;
  lg.input = rows.size();
  std::vector<SurpriseObservation> out;
  for (const auto& r : rows) {
    if (!r.report_date) {
      ++lg.missing_report_date;
      continue;
    }
    if (frequency == Horizon::Annual && r.fiscal_quarter != 4) {
      ++lg.not_year_end;
      continue;
    }
    const double pred = r.prediction(model, frequency);
    const double actual = r.actual(frequency);
    if (!std::isfinite(pred) || !std::isfinite(actual)) {
      ++lg.missing_prediction;
      continue;
    }
    if (pred == 0.0) {
      ++lg.zero_prediction;
      continue;
    }
    if (!(r.total_assets > 0.0) || !std::isfinite(r.tobins_q)) {
      ++lg.invalid_size;
      continue;
    }
    out.push_back({r.firm_id, *r.report_date, (actual - pred) / pred, std::log(r.total_assets), r.tobins_q,
                   r.fiscal_year, r.fiscal_quarter});
  }
  lg.kept = out.size();
  if (out.empty()) throw DataError("no observations left for the earnings response regression");
  return out;
}

void attach_abnormal_returns(std::vector<SurpriseObservation>& observations, const MarketIndex& market,
                             const MarketModelConfig& config, AbnormalReturnLog* log) {
  AbnormalReturnLog local;
  AbnormalReturnLog& lg = log ? *log : local;
  std::map<std::string, std::vector<std::size_t>> by_firm;
  for (std::size_t i = 0; i < observations.size(); ++i) by_firm[observations[i].firm_id].push_back(i);
  for (const auto& [firm, idx] : by_firm) {
    std::vector<Date> events;
    for (std::size_t i : idx) events.push_back(observations[i].event_date);
    const auto days = excess_returns(market.firm_days(firm));
    const auto fit = fit_market_model(firm, days, events, config);
    if (!fit) {
      ++lg.firms_skipped;
      continue;
    }
    ++lg.firms_fitted;
    lg.events_without_window += fit->skipped_events.size();
    lg.merged_windows += fit->warnings.size();
    std::map<Date, double> alpha;
    for (const auto& e : fit->events) alpha[e.event_date] = e.alpha2;
    for (std::size_t i : idx)
      if (auto it = alpha.find(observations[i].event_date); it != alpha.end()) observations[i].alpha2 = it->second;
  }
  std::erase_if(observations, [](const SurpriseObservation& o) { return !std::isfinite(o.alpha2); });
}

std::string_view cluster_name(ClusterBy c) { return c == ClusterBy::Firm ? "firm" : "year"; }

Eigen::MatrixXd clustered_covariance(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                                     std::span<const std::size_t> cluster, const Eigen::MatrixXd& xtx_inverse) {
  const auto n = X.rows();
  const auto k = X.cols();
  if (residuals.size() != n || static_cast<Eigen::Index>(cluster.size()) != n)
    throw ShapeError("clustered covariance: inputs disagree in length");
  std::map<std::size_t, Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, fresh] = scores.try_emplace(cluster[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(k));
    it->second += X.row(i).transpose() * residuals(i);
  }
  const auto G = static_cast<double>(scores.size());
  if (scores.size() < 2) throw DataError("clustered standard errors need at least two clusters");
  if (n <= k) throw DataError("clustered standard errors need more observations than regressors");
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [_, s] : scores) meat.noalias() += s * s.transpose();
  const double factor = G / (G - 1.0) * static_cast<double>(n - 1) / static_cast<double>(n - k);
  return factor * xtx_inverse * meat * xtx_inverse;
}

const Coefficient& ErcRegressionResult::operator[](std::string_view name) const {
  for (const auto& c : coefficients)
    if (c.name == name) return c;
  throw DataError("no coefficient named '" + std::string(name) + "'");
}

std::string significance_stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

ErcRegressionResult erc_regression(std::span<const SurpriseObservation> obs, Horizon frequency, ClusterBy cluster) {
  if (obs.empty()) throw DataError("earnings response regression on zero observations");
  std::map<std::string, std::size_t> firm_ids;
  std::set<int> years;
  for (const auto& o : obs) {
    if (!std::isfinite(o.alpha2) || !std::isfinite(o.surprise) || !std::isfinite(o.ln_total_assets) ||
        !std::isfinite(o.tobins_q))
      throw DataError("non-finite value in earnings response observations");
    firm_ids.try_emplace(o.firm_id, firm_ids.size());
    years.insert(o.year);
  }
  if (firm_ids.size() < 2) throw DataError("earnings response regression needs at least two firms");
  if (years.size() < 2) throw DataError("earnings response regression needs at least two years");

  std::vector<std::string> names = {"surprise", "ln_total_assets", "ln_total_assets_x_surprise", "tobins_q",
                                    "tobins_q_x_surprise"};
  const std::vector<int> dummy_years(std::next(years.begin()), years.end());
  for (int y : dummy_years) names.push_back("year_" + std::to_string(y));
  const bool quarterly = frequency == Horizon::Quarterly;
  if (quarterly)
    for (int q = 1; q <= 3; ++q) names.push_back("Q" + std::to_string(q));

  const auto n = static_cast<Eigen::Index>(obs.size());
  const auto k = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd y(n);
  std::vector<std::size_t> firm(obs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = obs[static_cast<std::size_t>(i)];
    firm[static_cast<std::size_t>(i)] = firm_ids.at(o.firm_id);
    X(i, 0) = o.surprise;
    X(i, 1) = o.ln_total_assets;
    X(i, 2) = o.ln_total_assets * o.surprise;
    X(i, 3) = o.tobins_q;
    X(i, 4) = o.tobins_q * o.surprise;
    for (std::size_t j = 0; j < dummy_years.size(); ++j)
      if (o.year == dummy_years[j]) X(i, static_cast<Eigen::Index>(5 + j)) = 1.0;
    if (quarterly && o.quarter >= 1 && o.quarter <= 3)
      X(i, static_cast<Eigen::Index>(5 + dummy_years.size()) + o.quarter - 1) = 1.0;
    y(i) = o.alpha2;
  }

  // Within-firm demeaning absorbs the firm effects.
  const std::size_t F = firm_ids.size();
  Eigen::MatrixXd col_mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(F), k);
  Eigen::VectorXd y_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(F));
  std::vector<double> count(F, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto f = static_cast<Eigen::Index>(firm[static_cast<std::size_t>(i)]);
    col_mean.row(f) += X.row(i);
    y_mean(f) += y(i);
    count[static_cast<std::size_t>(f)] += 1.0;
  }
  for (std::size_t f = 0; f < F; ++f) {
    col_mean.row(static_cast<Eigen::Index>(f)) /= count[f];
    y_mean(static_cast<Eigen::Index>(f)) /= count[f];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto f = static_cast<Eigen::Index>(firm[static_cast<std::size_t>(i)]);
    X.row(i) -= col_mean.row(f);
    y(i) -= y_mean(f);
  }

  const OlsFit fit = ols(X, y, names);
  std::vector<std::size_t> clusters(obs.size());
  std::map<int, std::size_t> year_ids;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (cluster == ClusterBy::Firm) clusters[i] = firm[i];
    else clusters[i] = year_ids.try_emplace(obs[i].year, year_ids.size()).first->second;
  }
  const Eigen::MatrixXd V = clustered_covariance(X, fit.residuals, clusters, fit.xtx_inverse);

  ErcRegressionResult res;
  res.frequency = frequency;
  res.cluster = cluster;
  res.n = obs.size();
  res.firms = F;
  res.clusters = cluster == ClusterBy::Firm ? F : year_ids.size();
  const double sst = y.squaredNorm();
  res.r2_within = sst > 0.0 ? 1.0 - fit.residuals.squaredNorm() / sst : 0.0;
  const boost::math::students_t dist(static_cast<double>(res.clusters - 1));
  for (Eigen::Index j = 0; j < k; ++j) {
    Coefficient c;
    c.name = names[static_cast<std::size_t>(j)];
    c.estimate = fit.coef(j);
    c.std_error = std::sqrt(std::max(0.0, V(j, j)));
    c.t = c.std_error > 0.0 ? c.estimate / c.std_error : 0.0;
    c.p = c.std_error > 0.0 ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(c.t))) : 1.0;
    c.stars = significance_stars(c.p);
    res.coefficients.push_back(std::move(c));
  }
  return res;
}

void write_coefficients_csv(std::ostream& out, const ErcRegressionResult& r, std::string_view model) {
  out << "model,frequency,cluster,name,estimate,std_error,t,p,stars,n,clusters,r2_within\n";
  for (const auto& c : r.coefficients)
    out << model << ',' << horizon_name(r.frequency) << ',' << cluster_name(r.cluster) << ',' << c.name << ','
        << csv::format_double(c.estimate) << ',' << csv::format_double(c.std_error) << ',' << csv::format_double(c.t)
        << ',' << csv::format_double(c.p) << ',' << c.stars << ',' << r.n << ',' << r.clusters << ','
        << csv::format_double(r.r2_within) << '\n';
}

std::string format_coefficients_text(std::span<const std::pair<std::string, ErcRegressionResult>> results) {
  std::ostringstream os;
  if (results.empty()) return "(no regressions)\n";
  char buf[64];
  os << horizon_name(results.front().second.frequency) << " earnings response regression, clustered by "
     << cluster_name(results.front().second.cluster) << '\n';
  std::snprintf(buf, sizeof buf, "%-28s", "");
  os << buf;
  for (const auto& [model, _] : results) {
    std::snprintf(buf, sizeof buf, "%18s", model.c_str());
    os << buf;
  }
  os << '\n';
  for (std::size_t j = 0; j < results.front().second.coefficients.size(); ++j) {
    const std::string name = results.front().second.coefficients[j].name;
    std::snprintf(buf, sizeof buf, "%-28s", name.c_str());
    os << buf;
    for (const auto& [_, r] : results) {
      const auto it = std::find_if(r.coefficients.begin(), r.coefficients.end(),
                                   [&](const Coefficient& c) { return c.name == name; });
      if (it == r.coefficients.end()) std::snprintf(buf, sizeof buf, "%18s", "-");
      else std::snprintf(buf, sizeof buf, "%14.4f%-4s", it->estimate, it->stars.c_str());
      os << buf;
    }
    os << "\n";
    std::snprintf(buf, sizeof buf, "%-28s", "");
    os << buf;
    for (const auto& [_, r] : results) {
      const auto it = std::find_if(r.coefficients.begin(), r.coefficients.end(),
                                   [&](const Coefficient& c) { return c.name == name; });
      if (it == r.coefficients.end()) std::snprintf(buf, sizeof buf, "%18s", "");
      else {
        char se[32];
        std::snprintf(se, sizeof se, "(%.4f)", it->std_error);
        std::snprintf(buf, sizeof buf, "%14s    ", se);
      }
      os << buf;
    }
    os << "\n";
  }
  for (const char* label : {"Observations", "R2 (within)"}) {
    std::snprintf(buf, sizeof buf, "%-28s", label);
    os << buf;
    for (const auto& [_, r] : results) {
      if (label[0] == 'O') std::snprintf(buf, sizeof buf, "%18zu", r.n);
      else std::snprintf(buf, sizeof buf, "%18.4f", r.r2_within);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace epsnet
