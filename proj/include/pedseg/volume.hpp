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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pedseg/error.hpp"

namespace pedseg {

/// Millimetres per voxel along x, y, z.
struct Spacing {
  double dx = 1.0;
  double dy = 1.0;
  double dz = 1.0;

  double voxel_volume() const { return dx * dy * dz; }
  std::array<double, 3> as_array() const { return {dx, dy, dz}; }
  bool operator==(const Spacing&) const = default;
};

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);
void validate_spacing(const Spacing& s);
void validate_dims(const Dims& d);

struct GridTag {};
struct LabelTag {};
struct MaskTag {};

/// Dense 3D field, x fastest: index = x + nx * (y + ny * z). The same layout
/// as a NIfTI payload, so conversion is a straight copy.
template <class T, class Tag>
class Volume {
 public:
  using value_type = T;

  Volume() = default;
  Volume(Dims dims, Spacing spacing, T fill = T{})
      : dims_(dims), spacing_(spacing), data_((validate_dims(dims), dims.count()), fill) {
    validate_spacing(spacing);
    check_values();
  }
  Volume(Dims dims, Spacing spacing, std::vector<T> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    validate_dims(dims);
    validate_spacing(spacing);
    if (data_.size() != dims.count()) {
      fail(Errc::InvalidArgument, "volume data length " + std::to_string(data_.size()) +
                                      " does not match dims " + to_string(dims));
    }
    check_values();
  }

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_.nx) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(z));
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_.nx && y < dims_.ny && z < dims_.nz;
  }

  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& at(int x, int y, int z) const { return data_[index(x, y, z)]; }
  T& at(int x, int y, int z) { return data_[index(x, y, z)]; }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const std::vector<T>& values() const { return data_; }

  template <class OtherT, class OtherTag>
  bool same_geometry(const Volume<OtherT, OtherTag>& other) const {
    return dims_ == other.dims();
  }

  bool operator==(const Volume&) const = default;

 private:
  void check_values() const;

  Dims dims_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

using VoxelGrid = Volume<double, GridTag>;
using LabelVolume = Volume<std::uint8_t, LabelTag>;
using Mask = Volume<std::uint8_t, MaskTag>;

template <>
void VoxelGrid::check_values() const;
template <>
void LabelVolume::check_values() const;
template <>
void Mask::check_values() const;

template <class A, class B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (!(a.dims() == b.dims())) {
    fail(Errc::DimsMismatch, std::string("dims mismatch in ") + what + ": " + to_string(a.dims()) +
                                 " vs " + to_string(b.dims()));
  }
}

/// Label codes of the annotated tumour subregions. Defaults follow the
/// BraTS-PED encoding; a different dataset can inject its own table.
struct LabelScheme {
  std::uint8_t et = 1;   // enhancing tumour
  std::uint8_t net = 2;  // non-enhancing tumour
  std::uint8_t cc = 3;   // cystic component
  std::uint8_t ed = 4;   // edema
};

enum class NormalizeRegion { Foreground, WholeVolume };

/// Z-score over the chosen region. In Foreground mode the statistics use the
/// nonzero voxels and the background stays 0. A region with zero spread maps
/// to all zeros.
VoxelGrid zscore_normalize(const VoxelGrid& grid, NormalizeRegion region = NormalizeRegion::Foreground);

/// Corner-aligned trilinear resampling. Spacing is scaled by n_in / n_out per
/// axis so the field of view is unchanged.
VoxelGrid trilinear_resample(const VoxelGrid& grid, Dims target);

/// Samples the grid at a continuous voxel coordinate with clamped trilinear
/// weights. Coordinates within 1e-9 of an integer are snapped.
double sample_trilinear(const VoxelGrid& grid, double x, double y, double z);

struct CompositeRegions {
  Mask tumor_core;   // ET u NET u CC
  Mask whole_tumor;  // TC u ED
};

CompositeRegions composite_regions(const LabelVolume& labels, const LabelScheme& scheme = {});

/// Voxels equal to one label code.
Mask label_mask(const LabelVolume& labels, std::uint8_t label);

std::size_t count_nonzero(const Mask& m);

}  // namespace pedseg
