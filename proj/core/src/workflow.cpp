// SPDX-License-Identifier: Apache-2.0
#include "epsnet/workflow.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "epsnet/error.hpp"

namespace epsnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string csv_of(const auto& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

}  // namespace

PreparedData prepare_data(std::span<const QuarterRecord> quarters, const MarketIndex& market, SplitFractions fractions) {
  PreparedData d;
  d.clean = clean_panel(quarters);
  d.split = chronological_split(d.clean.records, fractions);
  const PanelIndex panel(d.clean.records);
  d.raw_train = build_raw_windows(panel, market, d.split.train, &d.train_log);
  d.raw_validation = build_raw_windows(panel, market, d.split.validation, &d.validation_log);
  d.raw_test = build_raw_windows(panel, market, d.split.test, &d.test_log);
  if (d.raw_train.empty() || d.raw_validation.empty()) throw DataError("not enough windows to train");
  return d;
}

void ModelBundle::save(const std::string& dir) const {
  ensemble.save(dir);
  std::ofstream out(std::filesystem::path(dir) / "regression.json");
  if (!out) throw Error("cannot write regression.json in " + dir);
  out << regression.to_json() << '\n';
}

ModelBundle ModelBundle::load(const std::string& dir) {
  ModelBundle b;
  b.ensemble = EnsembleModel::load(dir);
  const auto path = (std::filesystem::path(dir) / "regression.json").string();
  std::ifstream in(path);
  if (!in) throw FileError(path);
  std::stringstream ss;
  ss << in.rdbuf();
  b.regression = RegressionBenchmark::from_json(ss.str());
  return b;
}

ModelBundle train_models(const PreparedData& data, const TrainConfig& config) {
  ModelBundle b;
  const FeatureStats stats = fit_feature_stats(data.raw_train);
  const auto train = apply_transforms(data.raw_train, stats);
  const auto validation = apply_transforms(data.raw_validation, stats);
  b.ensemble = train_ensemble(config, train, validation, stats);
  const PanelIndex panel(data.clean.records);
  b.regression = fit_regression_benchmark(panel, data.split.train);
  return b;
}

ForecastSet build_forecast_set(const PreparedData& data, const MarketIndex& market, const ModelBundle& bundle) {
  const PanelIndex panel(data.clean.records);
  const auto windows = apply_transforms(data.raw_test, bundle.ensemble.stats);
  const auto rnn = predict(bundle.ensemble, windows);
  ForecastSet set;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& meta = windows[i].meta;
    const auto* rec = panel.find(meta.firm_id, meta.fiscal_year, meta.fiscal_quarter);
    if (!rec) throw DataError("window without a panel record for " + meta.firm_id);
    ForecastRow r;
    r.firm_id = meta.firm_id;
    r.fiscal_year = meta.fiscal_year;
    r.fiscal_quarter = meta.fiscal_quarter;
    r.report_date = rec->report_date;
    r.total_assets = rec->total_assets;
    const auto last_day = market.window_before(meta.firm_id, meta.report_date, 1);
    r.tobins_q = last_day.empty() ? kNaN : last_day.back().tobins_q;
    r.industry = rec->industry.empty() ? "Other" : rec->industry;
    r.stock_price = rec->stock_price;
    r.actual_q = rec->eps;
    r.actual_y = windows[i].target_y_eps;
    const auto* prev = panel.find(meta.firm_id, meta.fiscal_year - 1, meta.fiscal_quarter);
    r.prev_q = prev ? prev->eps : kNaN;
    r.prev_y = panel.annual_eps(meta.firm_id, meta.fiscal_year - 1).value_or(kNaN);
    r.pred_q.fill(kNaN);
    r.pred_y.fill(kNaN);
    r.prediction(ModelTag::Rnn, Horizon::Quarterly) = rnn[i].q_eps;
    r.prediction(ModelTag::Rnn, Horizon::Annual) = rnn[i].y_eps;
    r.prediction(ModelTag::Analyst, Horizon::Quarterly) = rec->analyst_q_eps;
    r.prediction(ModelTag::Analyst, Horizon::Annual) = rec->analyst_y_eps;
    r.covered = std::isfinite(rec->analyst_q_eps) || std::isfinite(rec->analyst_y_eps);
    if (const auto state = regression_state(panel, *rec)) {
      const auto p = regression_predict(bundle.regression, *state);
      r.prediction(ModelTag::Regression, Horizon::Quarterly) = p.q_eps.value_or(kNaN);
      r.prediction(ModelTag::Regression, Horizon::Annual) = p.y_eps.value_or(kNaN);
    }
    const auto rw = random_walk_predict(panel, *rec);
    r.prediction(ModelTag::RandomWalk, Horizon::Quarterly) = rw.q_eps.value_or(kNaN);
    r.prediction(ModelTag::RandomWalk, Horizon::Annual) = rw.y_eps.value_or(kNaN);
    set.rows.push_back(std::move(r));
  }
  return set;
}

OutputFiles evaluate_forecasts(const ForecastSet& forecasts, const EvaluationConfig& config,
                               const std::optional<std::string>& slice) {
  OutputFiles files;
  std::ostringstream filter_log;
  filter_log << "sample,horizon,input,missing_model,zero_actual,penny,trimmed_low,trimmed_high,survivors\n";
  auto wanted = [&](const std::string& name) { return !slice || *slice == name; };

  for (Horizon h : {Horizon::Annual, Horizon::Quarterly}) {
    const std::string hn(horizon_name(h));
    auto log_line = [&](const std::string& sample, const FilterLog& l) {
      filter_log << sample << ',' << hn << ',' << l.input << ',' << l.missing_model << ',' << l.zero_actual << ','
                 << l.penny << ',' << l.trimmed_low << ',' << l.trimmed_high << ',' << l.survivors << '\n';
    };
    SampleFilterConfig fc;
    fc.horizon = h;
    fc.penny_threshold = config.penny_threshold;
    fc.trim = config.trim;
    PartitionConfig pc;
    pc.covid_start = config.covid_start;

    const bool needs_full = !slice || (*slice != "coverage" && *slice != "matched");
    if (needs_full) {
      const FilterResult full = apply_sample_filters(forecasts.rows, fc);
      log_line("all_models", full.log);
      for (PartitionKey key : {PartitionKey::All, PartitionKey::Quarter, PartitionKey::SizeDecile, PartitionKey::Industry,
                               PartitionKey::Year, PartitionKey::Covid}) {
        const std::string name(partition_name(key));
        if (!(wanted(name) || (key == PartitionKey::All && !slice))) continue;
        const auto reports = partition_evaluate(full.rows, key, h, pc);
        const std::string base = (key == PartitionKey::All ? std::string("overall") : name) + "_" + hn;
        files.emplace_back(base + ".csv", csv_of([&](std::ostream& os) { write_reports_csv(os, reports); }));
        files.emplace_back(base + ".txt", format_reports_text(reports));
      }
      if (!slice) {
        std::vector<std::pair<ModelTag, SignReport>> signs;
        for (ModelTag m : kAllModels) signs.emplace_back(m, sign_report(full.rows, m, h, config.sign_threshold));
        files.emplace_back("sign_" + hn + ".csv", csv_of([&](std::ostream& os) { write_sign_csv(os, signs, h); }));
        files.emplace_back("sign_" + hn + ".txt", format_sign_text(signs, h));
      }
    }

    if (wanted("coverage") || wanted("matched")) {
      SampleFilterConfig cc = fc;
      cc.models = {ModelTag::Rnn, ModelTag::Regression, ModelTag::RandomWalk};
      const FilterResult cov = apply_sample_filters(forecasts.rows, cc);
      log_line("coverage", cov.log);
      if (wanted("coverage")) {
        const auto reports = partition_evaluate(cov.rows, PartitionKey::Coverage, h, pc);
        files.emplace_back("coverage_" + hn + ".csv", csv_of([&](std::ostream& os) { write_reports_csv(os, reports); }));
        files.emplace_back("coverage_" + hn + ".txt", format_reports_text(reports));
      }
      if (wanted("matched")) {
        std::vector<ForecastRow> covered, uncovered;
        for (const auto& r : cov.rows) (r.covered ? covered : uncovered).push_back(r);
        std::string text;
        std::string csv;
        try {
          const auto rep = matched_evaluate(covered, uncovered, h, ModelTag::Rnn, config.match_limit);
          csv = csv_of([&](std::ostream& os) { write_matched_csv(os, rep); });
          text = format_matched_text(rep);
        } catch (const DataError& e) {
          csv = "horizon,model,industry,n,mapd_uncovered_pct,mapd_covered_pct,wilcoxon_statistic,wilcoxon_p\n";
          text = hn + " matched analysis unavailable: " + e.what() + "\n";
        }
        files.emplace_back("matched_" + hn + ".csv", csv);
        files.emplace_back("matched_" + hn + ".txt", text);
      }
    }
  }
  files.emplace_back("filter_log.csv", filter_log.str());
  return files;
}

OutputFiles run_erc(const ForecastSet& forecasts, const MarketIndex& market, Horizon frequency) {
  OutputFiles files;
  std::vector<std::pair<std::string, ErcRegressionResult>> results;
  std::ostringstream csv;
  std::ostringstream notes;
  bool header = false;
  for (ModelTag m : kAllModels) {
    const std::string name(model_name(m));
    try {
      auto obs = select_erc_sample(forecasts.rows, m, frequency);
      attach_abnormal_returns(obs, market);
      const auto res = erc_regression(obs, frequency);
      std::ostringstream one;
      write_coefficients_csv(one, res, name);
      std::string body = one.str();
      if (header) body = body.substr(body.find('\n') + 1);
      header = true;
      csv << body;
      results.emplace_back(name, res);
    } catch (const RankError& e) {
      notes << name << ": " << e.what() << " (";
      for (std::size_t i = 0; i < e.columns().size(); ++i) notes << (i ? ", " : "") << e.columns()[i];
      notes << ")\n";
    } catch (const DataError& e) {
      notes << name << ": " << e.what() << '\n';
    }
  }
  const std::string hn(horizon_name(frequency));
  files.emplace_back("erc_" + hn + ".csv", csv.str());
  files.emplace_back("erc_" + hn + ".txt", format_coefficients_text(results) + notes.str());
  return files;
}

void write_output_files(const std::string& dir, const OutputFiles& files) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : files) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw Error("cannot write " + name + " in " + dir);
    out << content;
  }
}

}  // namespace epsnet
