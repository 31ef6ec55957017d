// SPDX-License-Identifier: Apache-2.0
//
// Flat named-tensor container:
//   "EPSNETCK" | u32 version | u32 count | { u32 name_len | name | u64 rows | u64 cols | f64[rows*cols] }*
// All integers and doubles little-endian; tensor data row-major.
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "epsnet/nn/layers.hpp"

namespace epsnet::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

void write_checkpoint(std::ostream& out, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

}  // namespace epsnet::nn
