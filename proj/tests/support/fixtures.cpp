// SPDX-License-Identifier: Apache-2.0
#include "fixtures.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace epsnet::fixture {

TempDir::TempDir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "epsnet-test-XXXXXX").string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SynthConfig small_synth(std::size_t firms, int quarters, std::uint64_t seed) {
  SynthConfig c;
  c.firms = firms;
  c.quarters = quarters;
  c.seed = seed;
  return c;
}

SynthData make_synth_data(const SynthConfig& config) {
  SynthPanel panel = generate_panel(config);
  MarketIndex market(panel.market);
  PreparedData data = prepare_data(panel.quarters, market);
  FeatureStats stats = fit_feature_stats(data.raw_train);
  auto train = apply_transforms(data.raw_train, stats);
  auto validation = apply_transforms(data.raw_validation, stats);
  auto test = apply_transforms(data.raw_test, stats);
  return {std::move(panel), std::move(market), std::move(data), std::move(stats),
          std::move(train), std::move(validation), std::move(test)};
}

}  // namespace epsnet::fixture
