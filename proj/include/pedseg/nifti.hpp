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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pedseg/volume.hpp"

namespace pedseg::nifti {

enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

bool is_supported(std::int16_t code);
int bits_per_voxel(Datatype dt);

enum class Endian { Little, Big };

/// Every field of the 348-byte NIfTI-1 header. Orientation fields are kept
/// verbatim and never interpreted; geometry comes from pixdim alone.
struct Header {
  std::int32_t sizeof_hdr = 348;
  std::array<char, 10> data_type{};
  std::array<char, 18> db_name{};
  std::int32_t extents = 0;
  std::int16_t session_error = 0;
  char regular = 'r';
  char dim_info = 0;
  std::array<std::int16_t, 8> dim{};
  float intent_p1 = 0, intent_p2 = 0, intent_p3 = 0;
  std::int16_t intent_code = 0;
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::int16_t slice_start = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 352;
  float scl_slope = 1;
  float scl_inter = 0;
  std::int16_t slice_end = 0;
  char slice_code = 0;
  char xyzt_units = 0;
  float cal_max = 0, cal_min = 0;
  float slice_duration = 0;
  float toffset = 0;
  std::int32_t glmax = 0, glmin = 0;
  std::array<char, 80> descrip{};
  std::array<char, 24> aux_file{};
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0, quatern_c = 0, quatern_d = 0;
  float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
  std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
  std::array<char, 16> intent_name{};
  std::array<char, 4> magic{'n', '+', '1', '\0'};

  Endian source_endian = Endian::Little;

  std::size_t element_count() const;
  bool scaling_is_identity() const;
  bool operator==(const Header&) const = default;
};

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kDataOffset = 352;

/// Header plus payload decoded to reals with scl_slope / scl_inter applied.
struct Image {
  Header header;
  std::vector<double> data;

  bool operator==(const Image&) const = default;
};

struct WriteOptions {
  bool gzip = false;
  Endian endian = Endian::Little;
};

/// Parses a single-file NIfTI-1 stream, gunzipping first when the stream
/// starts with the gzip magic. Never reads past the declared payload.
Image parse(std::span<const std::byte> bytes);
std::vector<std::byte> write(const Image& image, const WriteOptions& options = {});

Image read_file(const std::filesystem::path& path);
/// gzip is chosen from a ".gz" suffix.
void write_file(const std::filesystem::path& path, const Image& image);

std::vector<std::byte> gzip_compress(std::span<const std::byte> raw);
std::vector<std::byte> gunzip(std::span<const std::byte> compressed);

VoxelGrid to_voxel_grid(const Image& image);
LabelVolume to_label_volume(const Image& image);

/// A fresh header describing the volume. Passing a reference header keeps its
/// orientation and descriptive fields.
Image from_voxel_grid(const VoxelGrid& grid, Datatype dt = Datatype::Float32, const Header* like = nullptr);
Image from_label_volume(const LabelVolume& labels, const Header* like = nullptr);

}  // namespace pedseg::nifti
