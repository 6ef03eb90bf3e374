/*
 * Copyright 2026 The pedseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pedseg/tensor.hpp"

namespace pedseg::nn {

/// Flat weight container:
///   "PSNP" | u32 version | u32 count |
///   per array: u32 name_len | name | u32 rank | u64 dims[rank] | f64 data[prod(dims)]
/// All integers and floats little-endian.
struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

inline constexpr std::uint32_t kSnapshotVersion = 1;

std::vector<std::uint8_t> encode_snapshot(const std::vector<NamedArray>& arrays);
std::vector<NamedArray> decode_snapshot(const std::vector<std::uint8_t>& bytes);

std::vector<NamedArray> snapshot_of(const std::vector<Param*>& params);
/// Copies values into matching params by name; shapes must agree.
void restore(const std::vector<Param*>& params, const std::vector<NamedArray>& arrays);

void save_snapshot(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_snapshot(const std::filesystem::path& path);

}  // namespace pedseg::nn
