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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace pedseg {

/// Flat key=value text with optional [section] headers and # comments. Keys
/// inside a section are addressed as "section.key".
///
///   ratio_upper=1.388
///   exclusion=[0.2, 5.0]
///   volume_thresholds={1:160, 3:50}
///   [augment]
///   rotation_deg=[-30, 30]
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const;
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }

  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::pair<double, double> get_range(const std::string& key, std::pair<double, double> fallback) const;
  std::map<std::uint8_t, double> get_label_map(const std::string& key,
                                               const std::map<std::uint8_t, double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

double parse_double(std::string_view text, const std::string& context);

}  // namespace pedseg
