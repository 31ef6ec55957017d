// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "epsnet/features.hpp"
#include "epsnet/synth.hpp"
#include "epsnet/workflow.hpp"

namespace epsnet::fixture {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf = {}) const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

SynthConfig small_synth(std::size_t firms = 40, int quarters = 20, std::uint64_t seed = 11);

/// Synthetic panel run through clean/split/window building.
struct SynthData {
  SynthPanel panel;
  MarketIndex market;
  PreparedData data;
  FeatureStats stats;
  std::vector<FeatureWindow> train, validation, test;
};

SynthData make_synth_data(const SynthConfig& config);

}  // namespace epsnet::fixture
