// SPDX-License-Identifier: Apache-2.0
//
// epsnet command-line tool.
//
// Exit codes: 0 ok, 1 internal, 2 usage, 3 missing file, 4 schema, 5 data, 6 output locked.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>

#include "epsnet/csv.hpp"
#include "epsnet/date.hpp"
#include "epsnet/error.hpp"
#include "epsnet/panel.hpp"
#include "epsnet/run_config.hpp"
#include "epsnet/synth.hpp"
#include "epsnet/workflow.hpp"

namespace fs = std::filesystem;
using namespace epsnet;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kMissingFile = 3, kSchema = 4, kData = 5, kLocked = 6 };

class LockedError : public Error {
 public:
  using Error::Error;
};

int fail(int code, const std::string& kind, const std::string& message) {
  nlohmann::json j = {{"error", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

/// Holds <dir>/.epsnet.lock for the lifetime of the command.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) {
    fs::create_directories(dir);
    path_ = fs::path(dir) / ".epsnet.lock";
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw LockedError("output directory '" + dir + "' is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

struct Options {
  std::string config;
  std::string forecasts;
  std::map<std::string, std::string> flags;
};

RunConfig resolve(const Options& o) {
  KeyValues kv;
  if (!o.config.empty()) kv = load_key_values(o.config);
  for (const auto& [k, v] : o.flags) kv[k] = v;
  RunConfig c = RunConfig::from_key_values(kv);
  c.validate();
  return c;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError("missing required flag " + flag);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<QuarterRecord> load_panel(const RunConfig& c, std::size_t* issues = nullptr) {
  auto loaded = load_quarter_panel(c.panel, QuarterSchema::from_overrides(c.columns));
  if (issues) *issues = loaded.issues.size();
  return std::move(loaded.records);
}

std::vector<DailyMarketRecord> load_market(const RunConfig& c) { return load_market_panel(c.market).records; }

int cmd_synth(const RunConfig& c) {
  require(c.out, "--out");
  DirLock lock(c.out);
  const SynthPanel panel = generate_panel(c.synth);
  std::ostringstream q, m, t;
  write_quarter_panel(q, panel.quarters);
  write_market_panel(m, panel.market);
  panel.write_truth_csv(t);
  write_text(fs::path(c.out) / "panel.csv", q.str());
  write_text(fs::path(c.out) / "market.csv", m.str());
  write_text(fs::path(c.out) / "truth.csv", t.str());
  std::cout << "synth: " << panel.quarters.size() << " quarter records, " << panel.market.size()
            << " market days -> " << c.out << '\n';
  return kOk;
}

int cmd_ingest(const RunConfig& c) {
  require(c.panel, "--panel");
  require(c.out, "--out");
  DirLock lock(c.out);
  const auto loaded = load_quarter_panel(c.panel, QuarterSchema::from_overrides(c.columns));
  std::ostringstream issues;
  issues << "line,kind,fields,message\n";
  for (const auto& i : loaded.issues) {
    std::string fields;
    for (std::size_t k = 0; k < i.fields.size(); ++k) fields += (k ? ";" : "") + i.fields[k];
    issues << i.line << ',' << (i.kind == RowIssue::Kind::Malformed ? "malformed" : "missing_value") << ','
           << csv::quote_if_needed(fields) << ',' << csv::quote_if_needed(i.message) << '\n';
  }
  write_text(fs::path(c.out) / "load_issues.csv", issues.str());

  const CleanResult clean = clean_panel(loaded.records);
  std::ostringstream log, panel, split_csv;
  clean.log.write_csv(log);
  write_text(fs::path(c.out) / "clean_log.csv", log.str());
  write_quarter_panel(panel, clean.records);
  write_text(fs::path(c.out) / "clean_panel.csv", panel.str());

  const SplitDataset split = chronological_split(clean.records, c.split);
  split_csv << "firm_id,fiscal_year,fiscal_quarter,report_date,partition\n";
  auto emit = [&](const std::vector<QuarterRecord>& part, const char* name) {
    for (const auto& r : part)
      split_csv << csv::quote_if_needed(r.firm_id) << ',' << *r.fiscal_year << ',' << *r.fiscal_quarter << ','
                << format_date(*r.report_date) << ',' << name << '\n';
  };
  emit(split.train, "train");
  emit(split.validation, "validation");
  emit(split.test, "test");
  write_text(fs::path(c.out) / "split.csv", split_csv.str());
  if (!c.market.empty()) {
    const auto market = load_market_panel(c.market);
    std::cout << "ingest: " << market.records.size() << " market days, " << market.rejected_rows
              << " market rows rejected\n";
  }
  std::cout << "ingest: " << loaded.records.size() << " rows loaded, " << loaded.issues.size() << " issues, "
            << clean.log.survivors << " rows after cleaning; split " << split.train.size() << '/'
            << split.validation.size() << '/' << split.test.size() << '\n';
  return kOk;
}

int cmd_train(const RunConfig& c) {
  require(c.panel, "--panel");
  require(c.market, "--market");
  require(c.model_dir, "--model-dir");
  DirLock lock(c.model_dir);
  const auto quarters = load_panel(c);
  const MarketIndex market(load_market(c));
  const PreparedData data = prepare_data(quarters, market, c.split);
  const ModelBundle bundle = train_models(data, c.train);
  bundle.save(c.model_dir);
  std::cout << "train: " << data.raw_train.size() << " train / " << data.raw_validation.size()
            << " validation windows; epochs";
  for (const auto& r : bundle.ensemble.reports) std::cout << ' ' << r.restored_epoch;
  std::cout << " -> " << c.model_dir << '\n';
  return kOk;
}

ForecastSet forecasts_for(const RunConfig& c, const ModelBundle& bundle) {
  const auto quarters = load_panel(c);
  const MarketIndex market(load_market(c));
  const PreparedData data = prepare_data(quarters, market, c.split);
  return build_forecast_set(data, market, bundle);
}

int cmd_predict(const RunConfig& c) {
  require(c.panel, "--panel");
  require(c.market, "--market");
  require(c.model_dir, "--model-dir");
  require(c.out, "--out");
  DirLock lock(c.out);
  const ModelBundle bundle = ModelBundle::load(c.model_dir);
  const ForecastSet set = forecasts_for(c, bundle);
  set.save((fs::path(c.out) / "forecasts.csv").string());
  std::cout << "predict: " << set.rows.size() << " forecast rows -> " << c.out << "/forecasts.csv\n";
  return kOk;
}

int cmd_evaluate(const RunConfig& c, const Options& o) {
  require(o.forecasts, "--forecasts");
  require(c.out, "--out");
  DirLock lock(c.out);
  const ForecastSet set = ForecastSet::load(o.forecasts);
  const auto files = evaluate_forecasts(set, c.evaluation, c.slice);
  write_output_files(c.out, files);
  std::cout << "evaluate: " << files.size() << " files -> " << c.out << '\n';
  return kOk;
}

int cmd_erc(const RunConfig& c, const Options& o) {
  require(o.forecasts, "--forecasts");
  require(c.market, "--market");
  require(c.out, "--out");
  DirLock lock(c.out);
  const ForecastSet set = ForecastSet::load(o.forecasts);
  const MarketIndex market(load_market(c));
  const auto files = run_erc(set, market, c.frequency);
  write_output_files(c.out, files);
  std::cout << "erc: " << horizon_name(c.frequency) << " regression -> " << c.out << '\n';
  return kOk;
}

int cmd_report(const RunConfig& c) {
  require(c.panel, "--panel");
  require(c.market, "--market");
  require(c.model_dir, "--model-dir");
  require(c.out, "--out");
  DirLock lock(c.out);
  const auto quarters = load_panel(c);
  const MarketIndex market(load_market(c));
  const PreparedData data = prepare_data(quarters, market, c.split);
  ModelBundle bundle;
  if (fs::exists(fs::path(c.model_dir) / "manifest.json")) {
    bundle = ModelBundle::load(c.model_dir);
  } else {
    DirLock model_lock(c.model_dir);
    bundle = train_models(data, c.train);
    bundle.save(c.model_dir);
  }
  const ForecastSet set = build_forecast_set(data, market, bundle);
  std::ostringstream fcsv;
  set.write_csv(fcsv);
  OutputFiles files{{"forecasts.csv", fcsv.str()}};
  for (auto& f : evaluate_forecasts(set, c.evaluation)) files.push_back(std::move(f));
  for (Horizon h : {Horizon::Annual, Horizon::Quarterly})
    for (auto& f : run_erc(set, market, h)) files.push_back(std::move(f));
  std::ostringstream clog;
  data.clean.log.write_csv(clog);
  files.emplace_back("clean_log.csv", clog.str());
  files.emplace_back("config.txt", c.canonical());

  nlohmann::json manifest = {{"format", "epsnet.report"}, {"version", 1}, {"config_hash", c.hash()},
                             {"model_stats_id", bundle.ensemble.stats_id}, {"files", nlohmann::json::array()}};
  for (const auto& [name, content] : files)
    manifest["files"].push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a", fnv1a_hex(content)}});
  files.emplace_back("manifest.json", manifest.dump(2) + "\n");
  write_output_files(c.out, files);
  std::cout << "report: " << files.size() << " files -> " << c.out << " (config " << c.hash() << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epsnet: earnings forecasting with recurrent networks"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, std::initializer_list<std::string> keys) {
    sub->add_option("--config", o.config, "key=value configuration file");
    static const std::map<std::string, std::pair<std::string, std::string>> flag_of = {
        {"panel", {"--panel", "quarterly panel CSV"}},
        {"market", {"--market", "daily market CSV"}},
        {"model_dir", {"--model-dir", "model bundle directory"}},
        {"out", {"--out", "output directory"}},
        {"seed", {"--seed", "random seed"}},
        {"frequency", {"--frequency", "annual or quarterly"}},
        {"slice", {"--slice", "quarter|size|industry|year|covid|coverage|matched"}},
    };
    for (const auto& key : keys) {
      const auto& [flag, help] = flag_of.at(key);
      sub->add_option_function<std::string>(flag, [&o, key](const std::string& v) { o.flags[key] = v; }, help);
    }
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic panel");
  add_common(synth, {"out", "seed"});
  auto* ingest = app.add_subcommand("ingest", "validate, clean and split a panel");
  add_common(ingest, {"panel", "market", "out"});
  auto* train = app.add_subcommand("train", "train the ensemble and the regression benchmark");
  add_common(train, {"panel", "market", "model_dir", "seed"});
  auto* predictc = app.add_subcommand("predict", "forecast the test partition with every model");
  add_common(predictc, {"panel", "market", "model_dir", "out"});
  auto* evaluate = app.add_subcommand("evaluate", "accuracy, bias and sign reports");
  add_common(evaluate, {"out", "slice"});
  evaluate->add_option("--forecasts", o.forecasts, "forecast CSV from predict");
  auto* erc = app.add_subcommand("erc", "earnings response regression");
  add_common(erc, {"market", "out", "frequency"});
  erc->add_option("--forecasts", o.forecasts, "forecast CSV from predict");
  auto* report = app.add_subcommand("report", "train if needed, then predict, evaluate and run the ERC");
  add_common(report, {"panel", "market", "model_dir", "out", "seed"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    const RunConfig c = resolve(o);
    if (synth->parsed()) return cmd_synth(c);
    if (ingest->parsed()) return cmd_ingest(c);
    if (train->parsed()) return cmd_train(c);
    if (predictc->parsed()) return cmd_predict(c);
    if (evaluate->parsed()) return cmd_evaluate(c, o);
    if (erc->parsed()) return cmd_erc(c, o);
    if (report->parsed()) return cmd_report(c);
    return fail(kUsage, "usage", "no subcommand");
  } catch (const UsageError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const FileError& e) {
    return fail(kMissingFile, "missing_file", e.what());
  } catch (const LockedError& e) {
    return fail(kLocked, "locked", e.what());
  } catch (const SchemaError& e) {
    return fail(kSchema, "schema", e.what());
  } catch (const RowError& e) {
    return fail(kSchema, "schema", e.what());
  } catch (const Error& e) {
    return fail(kData, "data", e.what());
  } catch (const std::exception& e) {
    return fail(kInternal, "internal", e.what());
  }
}
