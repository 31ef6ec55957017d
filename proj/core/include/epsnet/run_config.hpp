// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value run configuration. Lines starting with '#' are comments. Command-line flags
// override file entries.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "epsnet/evaluation.hpp"
#include "epsnet/forecaster.hpp"
#include "epsnet/panel.hpp"
#include "epsnet/synth.hpp"

namespace epsnet {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

struct EvaluationConfig {
  double penny_threshold = 5.0;
  double trim = 0.05;
  double sign_threshold = 0.05;
  Date covid_start = make_date(2020, 2, 18);
  double match_limit = 0.01;
};

struct RunConfig {
  std::string panel;
  std::string market;
  std::string model_dir;
  std::string out;
  std::uint64_t seed = 0;
  Horizon frequency = Horizon::Annual;
  std::optional<std::string> slice;

  TrainConfig train;
  SplitFractions split;
  EvaluationConfig evaluation;
  SynthConfig synth;
  /// column.<name> entries, passed to the panel schema.
  KeyValues columns;

  /// Unknown keys throw UsageError; malformed values throw UsageError naming the key.
  static RunConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
  /// Paths distinct, constants within their documented ranges.
  void validate() const;
  /// Sorted key=value lines.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string hash() const;
};

std::string fnv1a_hex(const std::string& text);

}  // namespace epsnet
