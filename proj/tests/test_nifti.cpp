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

#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <random>
#include <vector>

#include "pedseg/nifti.hpp"

using namespace pedseg;
using namespace pedseg::nifti;

namespace {

/// Packs a header by absolute byte offsets, without the library's writer.
class HandHeader {
 public:
  explicit HandHeader(bool big) : big_(big), bytes_(352, std::byte{0}) {}

  template <class T>
  void put(std::size_t offset, T v) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if (big_ == (std::endian::native == std::endian::little)) std::reverse(raw, raw + sizeof(T));
    std::memcpy(bytes_.data() + offset, raw, sizeof(T));
  }
  void magic(const char (&m)[4]) { std::memcpy(bytes_.data() + 344, m, 4); }
  template <class T>
  void payload(const std::vector<T>& values) {
    for (T v : values) {
      const std::size_t at = bytes_.size();
      bytes_.resize(at + sizeof(T));
      unsigned char raw[sizeof(T)];
      std::memcpy(raw, &v, sizeof(T));
      if (big_ == (std::endian::native == std::endian::little)) std::reverse(raw, raw + sizeof(T));
      std::memcpy(bytes_.data() + at, raw, sizeof(T));
    }
  }
  std::vector<std::byte>& bytes() { return bytes_; }

 private:
  bool big_;
  std::vector<std::byte> bytes_;
};

std::vector<float> golden_values() {
  std::vector<float> v(64);
  for (int i = 0; i < 64; ++i) v[i] = static_cast<float>(i) * 0.5f - 3.25f;
  return v;
}

/// 4x4x4 float32, pixdim (1, 1, 1).
std::vector<std::byte> golden(bool big) {
  HandHeader h(big);
  h.put<std::int32_t>(0, 348);
  h.put<char>(38, 'r');
  const std::int16_t dim[8] = {3, 4, 4, 4, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) h.put<std::int16_t>(40 + 2 * i, dim[i]);
  h.put<std::int16_t>(70, 16);
  h.put<std::int16_t>(72, 32);
  const float pixdim[8] = {1, 1, 1, 1, 0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) h.put<float>(76 + 4 * i, pixdim[i]);
  h.put<float>(108, 352.0f);
  h.put<float>(112, 1.0f);
  h.magic({'n', '+', '1', '\0'});
  h.payload(golden_values());
  return h.bytes();
}

Errc code_of(std::span<const std::byte> bytes) {
  try {
    parse(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("parse accepted the stream");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("golden float32 fixture") {
  const auto bytes = golden(false);
  const Image img = parse(bytes);
  CHECK(img.header.datatype == 16);
  CHECK(img.header.bitpix == 32);
  const auto grid = to_voxel_grid(img);
  CHECK(grid.dims() == Dims{4, 4, 4});
  CHECK(grid.spacing() == Spacing{1, 1, 1});
  const auto expect = golden_values();
  for (int i = 0; i < 64; ++i) CHECK(grid[i] == static_cast<double>(expect[i]));
  CHECK(grid.at(1, 2, 3) == static_cast<double>(expect[1 + 4 * (2 + 4 * 3)]));
  // The writer reproduces the hand-packed stream byte for byte.
  CHECK(write(img) == bytes);
}

TEST_CASE("big-endian twin decodes identically") {
  const Image le = parse(golden(false));
  const Image be = parse(golden(true));
  CHECK(be.header.source_endian == Endian::Big);
  CHECK(be.data == le.data);
  Header h = be.header;
  h.source_endian = Endian::Little;
  CHECK(h == le.header);
  CHECK(parse(write(le, {false, Endian::Big})).data == le.data);
}

TEST_CASE("gzip is transparent") {
  const auto raw = golden(false);
  const auto gz = gzip_compress(raw);
  CHECK(gz.size() >= 2);
  CHECK(gz[0] == std::byte{0x1f});
  CHECK(parse(gz) == parse(raw));
  CHECK(gunzip(gz) == raw);
  CHECK(parse(write(parse(raw), {true, Endian::Little})) == parse(raw));
}

TEST_CASE("rejections") {
  auto b = golden(false);
  SUBCASE("magic abcd") {
    std::memcpy(b.data() + 344, "abcd", 4);
    CHECK(code_of(b) == Errc::BadMagic);
  }
  SUBCASE("two-file magic") {
    std::memcpy(b.data() + 344, "ni1", 4);
    CHECK(code_of(b) == Errc::BadMagic);
  }
  SUBCASE("sizeof_hdr") {
    b[0] = std::byte{0x1c};
    b[1] = std::byte{0x02};  // 540, NIfTI-2
    CHECK(code_of(b) == Errc::BadHeader);
  }
  SUBCASE("datatype") {
    b[70] = std::byte{0x00};
    b[71] = std::byte{0x02};  // 512
    CHECK(code_of(b) == Errc::UnsupportedDatatype);
  }
  SUBCASE("bitpix") {
    b[72] = std::byte{8};
    b[73] = std::byte{0};
    CHECK(code_of(b) == Errc::BadHeader);
  }
  SUBCASE("dim[0]") {
    b[40] = std::byte{0};
    CHECK(code_of(b) == Errc::BadHeader);
  }
  SUBCASE("every truncation") {
    for (std::size_t n = 0; n < b.size(); ++n) {
      CAPTURE(n);
      CHECK(code_of(std::span<const std::byte>(b.data(), n)) == Errc::TruncatedPayload);
    }
  }
  SUBCASE("truncated gzip") {
    const auto gz = gzip_compress(b);
    CHECK(code_of(std::span<const std::byte>(gz.data(), gz.size() / 2)) == Errc::TruncatedPayload);
  }
}

TEST_CASE("round trips") {
  std::mt19937_64 rng(5);
  SUBCASE("labels as uint8") {
    LabelVolume l({5, 3, 2}, {0.5, 1.0, 2.5});
    for (auto& v : l.data()) v = static_cast<std::uint8_t>(rng() % 5);
    const Image img = from_label_volume(l);
    CHECK(img.header.datatype == 2);
    CHECK(img.header.bitpix == 8);
    const Image back = parse(write(img));
    CHECK(back == img);
    CHECK(to_label_volume(back) == l);
  }
  SUBCASE("grid as float32 is bit exact") {
    VoxelGrid g({4, 5, 6}, {1.2, 0.9, 3.0});
    for (auto& v : g.data()) v = static_cast<float>(std::normal_distribution<double>(0, 100)(rng));
    const Image img = from_voxel_grid(g);
    CHECK(img.header.datatype == 16);
    CHECK(img.header.bitpix == 32);
    const auto back = to_voxel_grid(parse(write(img)));
    CHECK(back.dims() == g.dims());
    CHECK(back.spacing().dx == static_cast<double>(1.2f));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::bit_cast<std::uint64_t>(back[i]) == std::bit_cast<std::uint64_t>(g[i]));
  }
  SUBCASE("every datatype, both byte orders, with scaling") {
    for (auto dt : {Datatype::UInt8, Datatype::Int16, Datatype::Int32, Datatype::Float32, Datatype::Float64}) {
      VoxelGrid g({3, 4, 2}, {});
      for (auto& v : g.data()) v = static_cast<double>(rng() % 100);
      Image img = from_voxel_grid(g, dt);
      img.header.scl_slope = 0.5f;
      img.header.scl_inter = -2.0f;
      for (auto& v : img.data) v = v * 0.5 - 2.0;
      for (auto e : {Endian::Little, Endian::Big}) {
        const Image back = parse(write(img, {false, e}));
        CHECK(back.data == img.data);
      }
    }
  }
  SUBCASE("slope 0 means identity") {
    auto b = golden(false);
    std::memset(b.data() + 112, 0, 4);
    CHECK(parse(b).data == parse(golden(false)).data);
  }
  SUBCASE("files") {
    const auto dir = std::filesystem::temp_directory_path() / "pedseg_test_nifti";
    std::filesystem::create_directories(dir);
    const Image img = parse(golden(false));
    write_file(dir / "a.nii.gz", img);
    write_file(dir / "a.nii", img);
    CHECK(read_file(dir / "a.nii.gz") == img);
    CHECK(read_file(dir / "a.nii") == img);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("mutated headers yield only structured errors") {
  const auto base = golden(false);
  std::mt19937_64 rng(11);
  int parsed = 0, rejected = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto b = base;
    const int flips = 1 + static_cast<int>(rng() % 4);
    for (int f = 0; f < flips; ++f) b[rng() % 352] = static_cast<std::byte>(rng() & 0xff);
    if (rng() % 4 == 0) b.resize(rng() % b.size());
    try {
      const Image img = parse(b);
      CHECK(img.data.size() == img.header.element_count());
      ++parsed;
    } catch (const Error&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 10000);
  CHECK(rejected > 0);
}
