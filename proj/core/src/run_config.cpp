// SPDX-License-Identifier: Apache-2.0
#include "epsnet/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "epsnet/csv.hpp"
#include "epsnet/error.hpp"

namespace epsnet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  const auto p = csv::parse_double(v);
  if (!p.ok || p.missing) throw UsageError("config key '" + key + "' expects a number, got '" + v + "'");
  return p.value;
}

template <class Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw UsageError("config key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::string num(double v) { return csv::format_double(v); }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto str = [&](const std::string& k, std::string RunConfig::*m) {
      t[k] = {[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
              [m](const RunConfig& c) { return c.*m; }};
    };
    auto real = [&](const std::string& k, auto getter) {
      t[k] = {[getter](RunConfig& c, const std::string& key, const std::string& v) { getter(c) = to_double(key, v); },
              [getter](const RunConfig& c) { return num(getter(const_cast<RunConfig&>(c))); }};
    };
    auto integer = [&](const std::string& k, auto getter) {
      t[k] = {[getter](RunConfig& c, const std::string& key, const std::string& v) {
                using T = std::remove_reference_t<decltype(getter(c))>;
                getter(c) = to_int<T>(key, v);
              },
              [getter](const RunConfig& c) { return std::to_string(getter(const_cast<RunConfig&>(c))); }};
    };
    str("panel", &RunConfig::panel);
    str("market", &RunConfig::market);
    str("model_dir", &RunConfig::model_dir);
    str("out", &RunConfig::out);
    t["seed"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                   c.seed = to_int<std::uint64_t>(k, v);
                   c.train.seed = c.seed;
                   c.synth.seed = c.seed;
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    t["frequency"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                        try {
                          c.frequency = parse_horizon(v);
                        } catch (const DataError& e) {
                          throw UsageError(e.what());
                        }
                      },
                      [](const RunConfig& c) { return std::string(horizon_name(c.frequency)); }};
    t["slice"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                    if (v.empty()) c.slice.reset();
                    else c.slice = v;
                  },
                  [](const RunConfig& c) { return c.slice.value_or(""); }};

    integer("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    real("train.learning_rate", [](RunConfig& c) -> double& { return c.train.learning_rate; });
    real("train.beta1", [](RunConfig& c) -> double& { return c.train.beta1; });
    real("train.beta2", [](RunConfig& c) -> double& { return c.train.beta2; });
    real("train.epsilon", [](RunConfig& c) -> double& { return c.train.epsilon; });
    real("train.dropout", [](RunConfig& c) -> double& { return c.train.dropout; });
    real("train.ema_lambda", [](RunConfig& c) -> double& { return c.train.ema_lambda; });
    integer("train.ensemble_size", [](RunConfig& c) -> int& { return c.train.ensemble_size; });
    integer("train.max_epochs", [](RunConfig& c) -> int& { return c.train.max_epochs; });

    real("split.train", [](RunConfig& c) -> double& { return c.split.train; });
    real("split.validation", [](RunConfig& c) -> double& { return c.split.validation; });
    real("split.test", [](RunConfig& c) -> double& { return c.split.test; });

    real("filter.penny", [](RunConfig& c) -> double& { return c.evaluation.penny_threshold; });
    real("filter.trim", [](RunConfig& c) -> double& { return c.evaluation.trim; });
    real("sign.threshold", [](RunConfig& c) -> double& { return c.evaluation.sign_threshold; });
    real("match.limit", [](RunConfig& c) -> double& { return c.evaluation.match_limit; });
    t["covid.start"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                          try {
                            c.evaluation.covid_start = parse_date(v);
                          } catch (const DataError&) {
                            throw UsageError("config key '" + k + "' expects YYYY-MM-DD, got '" + v + "'");
                          }
                        },
                        [](const RunConfig& c) { return format_date(c.evaluation.covid_start); }};

    integer("synth.firms", [](RunConfig& c) -> std::size_t& { return c.synth.firms; });
    integer("synth.quarters", [](RunConfig& c) -> int& { return c.synth.quarters; });
    integer("synth.start_year", [](RunConfig& c) -> int& { return c.synth.start_year; });
    integer("synth.max_entry_offset", [](RunConfig& c) -> int& { return c.synth.max_entry_offset; });
    real("synth.mu_mean", [](RunConfig& c) -> double& { return c.synth.mu_mean; });
    real("synth.mu_sd", [](RunConfig& c) -> double& { return c.synth.mu_sd; });
    real("synth.rho_min", [](RunConfig& c) -> double& { return c.synth.rho_min; });
    real("synth.rho_max", [](RunConfig& c) -> double& { return c.synth.rho_max; });
    real("synth.noise_sd", [](RunConfig& c) -> double& { return c.synth.noise_sd; });
    real("synth.crisis_shock", [](RunConfig& c) -> double& { return c.synth.crisis_shock; });
    real("synth.analyst_bias", [](RunConfig& c) -> double& { return c.synth.analyst_bias; });
    real("synth.analyst_noise", [](RunConfig& c) -> double& { return c.synth.analyst_noise; });
    real("synth.erc", [](RunConfig& c) -> double& { return c.synth.erc; });
    real("synth.pre_announcement_drift", [](RunConfig& c) -> double& { return c.synth.pre_announcement_drift; });
    return t;
  }();
  return table;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(n) + ": expected key=value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw UsageError("config line " + std::to_string(n) + ": empty key");
    kv[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path);
  return parse_key_values(in);
}

RunConfig RunConfig::from_key_values(const KeyValues& kv) {
  RunConfig c;
  // seed first so explicit train/synth entries are not overwritten by it.
  if (auto it = kv.find("seed"); it != kv.end()) fields().at("seed").set(c, it->first, it->second);
  for (const auto& [key, value] : kv) {
    if (key == "seed") continue;
    if (key.rfind("column.", 0) == 0) {
      c.columns[key] = value;
      continue;
    }
    const auto f = fields().find(key);
    if (f == fields().end()) throw UsageError("unknown config key '" + key + "'");
    f->second.set(c, key, value);
  }
  return c;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv = columns;
  for (const auto& [key, f] : fields()) kv[key] = f.get(*this);
  return kv;
}

void RunConfig::validate() const {
  std::vector<std::string> paths;
  for (const auto* p : {&panel, &market, &model_dir, &out})
    if (!p->empty()) paths.push_back(*p);
  for (std::size_t i = 0; i < paths.size(); ++i)
    for (std::size_t j = i + 1; j < paths.size(); ++j)
      if (paths[i] == paths[j]) throw UsageError("paths must be distinct: '" + paths[i] + "' used twice");
  try {
    train.validate();
    synth.validate();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  const auto& e = evaluation;
  if (!(e.penny_threshold >= 0.0)) throw UsageError("filter.penny must be non-negative");
  if (!(e.trim >= 0.0 && e.trim < 0.5)) throw UsageError("filter.trim must be in [0, 0.5)");
  if (!(e.sign_threshold > 0.0 && e.sign_threshold < 1.0)) throw UsageError("sign.threshold must be in (0, 1)");
  if (!(e.match_limit > 0.0)) throw UsageError("match.limit must be positive");
  if (!(split.train > 0.0 && split.validation > 0.0 && split.test > 0.0) ||
      std::abs(split.train + split.validation + split.test - 1.0) > 1e-9)
    throw UsageError("split fractions must be positive and sum to 1");
  if (slice) {
    if (*slice != "matched") {
      try {
        parse_partition_key(*slice);
      } catch (const DataError& err) {
        throw UsageError(err.what());
      }
    }
  }
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_key_values()) os << k << '=' << v << '\n';
  return os.str();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

}  // namespace epsnet
