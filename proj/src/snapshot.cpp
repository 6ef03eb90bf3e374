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

#include "pedseg/snapshot.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "pedseg/error.hpp"

namespace pedseg::nn {

namespace {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(b), std::end(b));
  out.insert(out.end(), std::begin(b), std::end(b));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(b), std::end(b));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    if (n > remaining()) fail(Errc::TruncatedPayload, "snapshot ends early at byte " + std::to_string(pos_));
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const std::vector<NamedArray>& arrays) {
  std::vector<std::uint8_t> out{'P', 'S', 'N', 'P'};
  put<std::uint32_t>(out, kSnapshotVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    std::uint64_t count = 1;
    for (auto d : a.shape) count *= d;
    if (count != a.values.size()) fail(Errc::ShapeMismatch, "array '" + a.name + "' shape does not match its data");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (auto d : a.shape) put<std::uint64_t>(out, d);
    for (double v : a.values) put<double>(out, v);
  }
  return out;
}

std::vector<NamedArray> decode_snapshot(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.string(4) != "PSNP") fail(Errc::BadMagic, "not a weight snapshot (magic mismatch)");
  const auto version = r.get<std::uint32_t>();
  if (version != kSnapshotVersion) fail(Errc::BadHeader, "unsupported snapshot version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedArray> arrays;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.string(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    r.need(static_cast<std::size_t>(rank) * 8);
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint64_t>();
      if (d != 0 && n > r.remaining() / 8 / d) fail(Errc::TruncatedPayload, "array '" + a.name + "' exceeds the file");
      n *= d;
      a.shape.push_back(d);
    }
    r.need(n * 8);
    a.values.resize(n);
    for (auto& v : a.values) v = r.get<double>();
    arrays.push_back(std::move(a));
  }
  if (r.remaining() != 0) fail(Errc::BadHeader, "trailing bytes after the last array");
  return arrays;
}

std::vector<NamedArray> snapshot_of(const std::vector<Param*>& params) {
  std::vector<NamedArray> out;
  for (const Param* p : params) {
    out.push_back({p->name, std::vector<std::uint64_t>(p->shape.begin(), p->shape.end()), p->value});
  }
  return out;
}

void restore(const std::vector<Param*>& params, const std::vector<NamedArray>& arrays) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;
  for (Param* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) fail(Errc::ShapeMismatch, "snapshot has no array named '" + p->name + "'");
    const NamedArray& a = *it->second;
    if (!std::equal(a.shape.begin(), a.shape.end(), p->shape.begin(), p->shape.end())) {
      fail(Errc::ShapeMismatch, "snapshot array '" + p->name + "' has a different shape");
    }
    p->value = a.values;
  }
}

void save_snapshot(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  const auto bytes = encode_snapshot(arrays);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(Errc::IoError, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(Errc::IoError, "short write to " + path.string());
}

std::vector<NamedArray> load_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::IoError, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace pedseg::nn
