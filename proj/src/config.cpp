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

#include "pedseg/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pedseg/error.hpp"

namespace pedseg {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_brackets(std::string_view s, char open, char close, const std::string& key) {
  s = trim(s);
  if (s.size() < 2 || s.front() != open || s.back() != close) {
    fail(Errc::ConfigError, "config key '" + key + "' expects " + open + "..." + close);
  }
  return s.substr(1, s.size() - 2);
}

}  // namespace

double parse_double(std::string_view text, const std::string& context) {
  text = trim(text);
  const std::string s(text);
  if (s == "inf" || s == "+inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v)) {
    fail(Errc::ConfigError, "cannot parse '" + s + "' as a number for " + context);
  }
  return v;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view l = trim(line);
    if (l.empty()) continue;
    if (l.front() == '[' && l.back() == ']' && l.find('=') == std::string_view::npos) {
      section = std::string(trim(l.substr(1, l.size() - 2)));
      continue;
    }
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      fail(Errc::ConfigError, "config line " + std::to_string(lineno) + " is not key=value");
    }
    std::string key(trim(l.substr(0, eq)));
    if (key.empty()) fail(Errc::ConfigError, "config line " + std::to_string(lineno) + " has an empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.entries_[key] = std::string(trim(l.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::raw(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto v = raw(key);
  return v ? parse_double(*v, "config key '" + key + "'") : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  const double d = parse_double(*v, "config key '" + key + "'");
  if (d != std::floor(d) || std::fabs(d) > 9e15) fail(Errc::ConfigError, "config key '" + key + "' expects an integer");
  return static_cast<long long>(d);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "on" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "off" || *v == "no") return false;
  fail(Errc::ConfigError, "config key '" + key + "' expects a boolean");
}

std::pair<double, double> KeyValueConfig::get_range(const std::string& key, std::pair<double, double> fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  const std::string_view body = strip_brackets(*v, '[', ']', key);
  const auto comma = body.find(',');
  if (comma == std::string_view::npos) fail(Errc::ConfigError, "config key '" + key + "' expects [low, high]");
  const double lo = parse_double(body.substr(0, comma), key);
  const double hi = parse_double(body.substr(comma + 1), key);
  if (!(lo <= hi)) fail(Errc::DegenerateRange, "config key '" + key + "' has low > high");
  return {lo, hi};
}

std::map<std::uint8_t, double> KeyValueConfig::get_label_map(const std::string& key,
                                                             const std::map<std::uint8_t, double>& fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::map<std::uint8_t, double> out;
  std::string_view body = trim(strip_brackets(*v, '{', '}', key));
  while (!body.empty()) {
    const auto comma = body.find(',');
    const std::string_view item = trim(body.substr(0, comma));
    body = comma == std::string_view::npos ? std::string_view{} : trim(body.substr(comma + 1));
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) fail(Errc::ConfigError, "config key '" + key + "' expects {label:value, ...}");
    const double label = parse_double(item.substr(0, colon), key);
    if (label != std::floor(label) || label < 0 || label > 255) {
      fail(Errc::ConfigError, "config key '" + key + "' has an invalid label");
    }
    out[static_cast<std::uint8_t>(label)] = parse_double(item.substr(colon + 1), key);
  }
  return out;
}

}  // namespace pedseg
