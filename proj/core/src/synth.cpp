// SPDX-License-Identifier: Apache-2.0
#include "epsnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>

#include "epsnet/csv.hpp"
#include "epsnet/error.hpp"

namespace epsnet {

namespace {

using Rng = std::mt19937_64;

constexpr std::array<const char*, 10> kSectors{
    "Basic Materials", "Consumer Cyclicals", "Consumer Non-Cyclicals", "Energy", "Financials",
    "Healthcare",      "Industrials",        "Technology",             "Utilities", "Real Estate"};

Rng derived_rng(std::uint64_t seed, std::uint64_t index, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), stream};
  return Rng(seq);
}

Date quarter_end(int year, int quarter) {
  namespace ch = std::chrono;
  return ch::sys_days{ch::year{year} / ch::month{static_cast<unsigned>(3 * quarter)} / ch::last};
}

Date quarter_start(int year, int quarter) { return make_date(year, static_cast<unsigned>(3 * quarter - 2), 1); }

struct Quarter {
  int year;
  int quarter;
  Date end;
  Date report;
  std::size_t event_index;  // into the global calendar
  double eps;
  double expected;
  double surprise;
  double total_assets;
  double book_equity;
  double dividends;
  double accruals;
};

}  // namespace

void SynthConfig::validate() const {
  if (firms == 0 || quarters < 1) throw DataError("synth: need at least one firm and one quarter");
  if (max_entry_offset < 0) throw DataError("synth: max_entry_offset must be non-negative");
  if (!(rho_min >= 0.0 && rho_max < 1.0 && rho_min <= rho_max)) throw DataError("synth: rho must lie in [0, 1)");
  for (double s : {mu_sd, noise_sd, analyst_noise, market_sd, beta_sd, idiosyncratic_sd, vol_index_sd})
    if (!(s >= 0.0)) throw DataError("synth: standard deviations must be non-negative");
  if (!(mu_min > 0.0)) throw DataError("synth: mu_min must be positive");
  if (!(vol_index_persistence >= 0.0 && vol_index_persistence < 1.0))
    throw DataError("synth: vol_index_persistence must lie in [0, 1)");
  if (!(volume_median > 0.0) || !(price_earnings > 0.0)) throw DataError("synth: volume_median and price_earnings must be positive");
  if (crisis_quarters < 0) throw DataError("synth: crisis_quarters must be non-negative");
}

SynthPanel generate_panel(const SynthConfig& cfg) {
  cfg.validate();
  SynthPanel out;

  // Global weekday calendar covering every firm's history plus a margin.
  const int last_abs = cfg.max_entry_offset + cfg.quarters;
  const Date first_day = quarter_start(cfg.start_year, 1) - std::chrono::days{140};
  const Date last_day = quarter_end(cfg.start_year + last_abs / 4 + 1, 4) + std::chrono::days{10};
  std::vector<Date> calendar;
  for (Date d = first_day; d <= last_day; d += std::chrono::days{1})
    if (is_weekday(d)) calendar.push_back(d);
  const std::size_t T = calendar.size();

  std::vector<double> market(T), vol(T);
  {
    Rng rng = derived_rng(cfg.seed, 0, 1);
    std::normal_distribution<double> z;
    double v = cfg.vol_index_mean;
    for (std::size_t t = 0; t < T; ++t) {
      market[t] = cfg.market_mean + cfg.market_sd * z(rng);
      v = cfg.vol_index_mean + cfg.vol_index_persistence * (v - cfg.vol_index_mean) + cfg.vol_index_sd * z(rng);
      vol[t] = std::max(5.0, v);
    }
  }
  auto first_on_or_after = [&](Date d) {
    return static_cast<std::size_t>(std::lower_bound(calendar.begin(), calendar.end(), d) - calendar.begin());
  };
  auto last_on_or_before = [&](Date d) {
    const auto it = std::upper_bound(calendar.begin(), calendar.end(), d);
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - calendar.begin()) - 1));
  };

  for (std::size_t i = 0; i < cfg.firms; ++i) {
    Rng rng = derived_rng(cfg.seed, i + 1, 2);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u01;
    char id_buf[16];
    std::snprintf(id_buf, sizeof id_buf, "F%05zu", i + 1);
    const std::string firm = id_buf;

    const int entry = std::uniform_int_distribution<int>(0, cfg.max_entry_offset)(rng);
    double mu = cfg.mu_mean + cfg.mu_sd * z(rng);
    for (int tries = 0; mu < cfg.mu_min && tries < 100; ++tries) mu = cfg.mu_mean + cfg.mu_sd * z(rng);
    mu = std::max(mu, cfg.mu_min);
    const double rho = cfg.rho_min + (cfg.rho_max - cfg.rho_min) * u01(rng);
    const double beta = cfg.beta_mean + cfg.beta_sd * z(rng);
    const double ln_shares = std::log(0.05) + 1.2 * z(rng);
    const double shares = std::exp(ln_shares);
    const double price0 = cfg.price_earnings * 4.0 * mu;
    const double assets0 = price0 * shares * std::exp(0.2 + 0.4 * z(rng));
    const double growth = 0.01 + 0.005 * z(rng);
    const double equity_ratio = 0.25 + 0.35 * u01(rng);
    const std::string sector = kSectors[std::uniform_int_distribution<std::size_t>(0, kSectors.size() - 1)(rng)];
    const double size_z = (ln_shares - std::log(0.05)) / 1.2;
    const bool covered = u01(rng) < 1.0 / (1.0 + std::exp(-(cfg.coverage_intercept + cfg.coverage_slope * size_z)));

    const double sigma = cfg.noise_sd * mu;
    const double stationary = rho < 1.0 ? sigma / std::sqrt(1.0 - rho * rho) : sigma;
    std::array<double, 4> dev{};
    for (double& d : dev) d = stationary * z(rng);

    std::vector<Quarter> qs;
    int crisis_left = cfg.crisis_quarters;
    for (int t = 0; t < cfg.quarters; ++t) {
      const int abs_q = entry + t;
      Quarter q{};
      q.year = cfg.start_year + abs_q / 4;
      q.quarter = abs_q % 4 + 1;
      q.end = quarter_end(q.year, q.quarter);
      q.report = roll_forward_to_weekday(q.end + std::chrono::days{std::uniform_int_distribution<int>(25, 45)(rng)});
      const auto s = static_cast<std::size_t>(q.quarter - 1);
      const double season = mu * cfg.seasonal[s];
      q.expected = mu + season + rho * dev[s];
      double shock = 0.0;
      if (crisis_left > 0 && q.end >= cfg.crisis_date) {
        shock = cfg.crisis_shock * mu;
        --crisis_left;
      }
      q.eps = q.expected + shock + sigma * z(rng);
      dev[s] = q.eps - mu - season;
      q.surprise = q.expected != 0.0 ? (q.eps - q.expected) / q.expected : 0.0;
      q.total_assets = assets0 * std::exp(growth * t + 0.02 * z(rng));
      q.book_equity = equity_ratio * q.total_assets;
      q.dividends = 0.3 * mu * shares * std::exp(0.1 * z(rng));
      q.accruals = 0.02 * z(rng) * q.total_assets;
      q.event_index = first_on_or_after(q.report);
      qs.push_back(q);
    }

    // Daily returns with the planted pre-announcement drift and announcement reaction.
    const std::size_t day0 = first_on_or_after(quarter_start(qs.front().year, qs.front().quarter) - std::chrono::days{100});
    const std::size_t day1 = std::min(T - 1, qs.back().event_index + 5);
    std::vector<double> extra(T, 0.0);
    std::size_t previous_end = 0;
    for (const auto& q : qs) {
      const std::size_t k = q.event_index;
      if (k + 1 >= T || k < 64) continue;
      for (std::size_t t = k - 1; t <= k + 1; ++t) extra[t] += cfg.erc * q.surprise / 3.0;
      // The drift stays clear of the previous announcement window.
      const std::size_t first = std::max(k - 63, previous_end + 1);
      for (std::size_t t = first; t <= k - 2; ++t)
        extra[t] += cfg.pre_announcement_drift * q.surprise / static_cast<double>(k - 1 - first);
      previous_end = k + 1;
    }
    std::vector<double> price(T, price0);
    double p = price0;
    std::size_t next_report = 0;
    for (std::size_t t = day0; t <= day1; ++t) {
      const double r = cfg.risk_free_daily + beta * (market[t] - cfg.risk_free_daily) + cfg.idiosyncratic_sd * z(rng) + extra[t];
      p *= 1.0 + r;
      price[t] = p;
      while (next_report + 1 < qs.size() && qs[next_report + 1].report <= calendar[t]) ++next_report;
      const auto& book = qs[next_report];
      DailyMarketRecord d;
      d.firm_id = firm;
      d.date = calendar[t];
      d.stock_return = r;
      d.volume_per_share = cfg.volume_median * std::exp(0.5 * z(rng));
      d.market_return = market[t];
      d.vol_index_level = vol[t];
      d.tobins_q = (p * shares + book.total_assets - book.book_equity) / book.total_assets;
      d.risk_free_rate = cfg.risk_free_daily;
      out.market.push_back(std::move(d));
    }

    std::map<int, std::pair<int, double>> annual;  // year -> (quarters seen, sum)
    for (const auto& q : qs) {
      auto& a = annual[q.year];
      ++a.first;
      a.second += q.eps;
    }
    for (const auto& q : qs) {
      QuarterRecord r;
      r.firm_id = firm;
      r.fiscal_year = q.year;
      r.fiscal_quarter = q.quarter;
      r.frequency = Frequency::Quarterly;
      r.report_date = q.report;
      r.eps = q.eps;
      r.total_assets = q.total_assets;
      r.book_equity = q.book_equity;
      r.shares_outstanding = shares;
      r.dividends_total = q.dividends;
      r.accruals_total = q.accruals;
      r.stock_price = price[std::clamp(last_on_or_before(q.end), day0, day1)];
      r.industry = sector;
      if (covered) {
        r.analyst_q_eps = q.eps * (1.0 - cfg.analyst_bias + cfg.analyst_noise * z(rng));
        const auto& a = annual[q.year];
        const double noise = cfg.analyst_noise * (5.0 - q.quarter) / 4.0 * z(rng);
        if (a.first == 4) r.analyst_y_eps = a.second * (1.0 - cfg.analyst_bias + noise);
      }
      out.quarters.push_back(std::move(r));

      GroundTruthRow g;
      g.firm_id = firm;
      g.fiscal_year = q.year;
      g.fiscal_quarter = q.quarter;
      g.report_date = q.report;
      g.event_date = calendar[std::min(q.event_index, T - 1)];
      g.eps = q.eps;
      g.expected_eps = q.expected;
      g.surprise = q.surprise;
      g.planted_abnormal_return = cfg.erc * q.surprise;
      g.mu = mu;
      g.rho = rho;
      g.beta = beta;
      g.covered = covered;
      out.truth.push_back(std::move(g));
    }
  }
  return out;
}

void SynthPanel::write_truth_csv(std::ostream& out) const {
  out << "firm_id,fiscal_year,fiscal_quarter,report_date,event_date,eps,expected_eps,surprise,"
         "planted_abnormal_return,mu,rho,beta,covered\n";
  for (const auto& g : truth)
    out << g.firm_id << ',' << g.fiscal_year << ',' << g.fiscal_quarter << ',' << format_date(g.report_date) << ','
        << format_date(g.event_date) << ',' << csv::format_double(g.eps) << ',' << csv::format_double(g.expected_eps)
        << ',' << csv::format_double(g.surprise) << ',' << csv::format_double(g.planted_abnormal_return) << ','
        << csv::format_double(g.mu) << ',' << csv::format_double(g.rho) << ',' << csv::format_double(g.beta) << ','
        << (g.covered ? 1 : 0) << '\n';
}

std::vector<SurpriseObservation> planted_surprises(const SynthPanel& panel) {
  const PanelIndex index(panel.quarters);
  const MarketIndex market(panel.market);
  std::vector<SurpriseObservation> out;
  for (const auto& g : panel.truth) {
    const auto* rec = index.find(g.firm_id, g.fiscal_year, g.fiscal_quarter);
    const auto before = market.window_before(g.firm_id, g.report_date, 1);
    if (!rec || before.empty() || !(rec->total_assets > 0.0)) continue;
    out.push_back({g.firm_id, g.report_date, g.surprise, std::log(rec->total_assets), before.back().tobins_q,
                   g.fiscal_year, g.fiscal_quarter});
  }
  return out;
}

}  // namespace epsnet
