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

#include "pedseg/volume.hpp"

#include <algorithm>
#include <cmath>

#include "pedseg/simd/kernels.hpp"

namespace pedseg {

std::string to_string(const Dims& d) {
  return "(" + std::to_string(d.nx) + "," + std::to_string(d.ny) + "," + std::to_string(d.nz) + ")";
}

void validate_spacing(const Spacing& s) {
  for (double v : s.as_array()) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(Errc::InvalidArgument, "spacing must be positive and finite");
  }
}

void validate_dims(const Dims& d) {
  if (d.nx < 1 || d.ny < 1 || d.nz < 1) fail(Errc::InvalidArgument, "dims must be >= 1, got " + to_string(d));
}

template <>
void VoxelGrid::check_values() const {
  for (double v : data_) {
    if (!std::isfinite(v)) fail(Errc::NonFiniteData, "voxel grid contains a non-finite value");
  }
}

template <>
void LabelVolume::check_values() const {
  for (std::uint8_t v : data_) {
    if (v > 4) fail(Errc::InvalidLabel, "label value " + std::to_string(v) + " outside {0..4}");
  }
}

template <>
void Mask::check_values() const {
  for (std::uint8_t v : data_) {
    if (v > 1) fail(Errc::InvalidArgument, "mask value must be 0 or 1");
  }
}

VoxelGrid zscore_normalize(const VoxelGrid& grid, NormalizeRegion region) {
  if (grid.empty()) fail(Errc::InvalidArgument, "zscore_normalize on empty grid");
  const auto in = grid.data();
  std::vector<double> out(in.size(), 0.0);

  if (region == NormalizeRegion::WholeVolume) {
    const double n = static_cast<double>(in.size());
    const double mean = simd::sum(in) / n;
    const double sd = std::sqrt(simd::sum_sq_dev(in, mean) / n);
    if (sd > 0.0) simd::scale_shift(in, out, 1.0 / sd, -mean / sd);
    return VoxelGrid(grid.dims(), grid.spacing(), std::move(out));
  }

  std::vector<double> fg;
  fg.reserve(in.size());
  for (double v : in) {
    if (v != 0.0) fg.push_back(v);
  }
  if (fg.empty()) return VoxelGrid(grid.dims(), grid.spacing(), std::move(out));
  const double n = static_cast<double>(fg.size());
  const double mean = simd::sum(fg) / n;
  const double sd = std::sqrt(simd::sum_sq_dev(fg, mean) / n);
  if (sd > 0.0) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] != 0.0) out[i] = (in[i] - mean) / sd;
    }
  }
  return VoxelGrid(grid.dims(), grid.spacing(), std::move(out));
}

namespace {

double snap(double c) {
  const double r = std::round(c);
  return std::fabs(c - r) < 1e-9 ? r : c;
}

// Source coordinate for output index i under corner alignment.
double source_coord(int i, int n_in, int n_out) {
  if (n_out == 1) return 0.5 * (n_in - 1);
  return static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
}

}  // namespace

double sample_trilinear(const VoxelGrid& grid, double x, double y, double z) {
  const Dims& d = grid.dims();
  x = std::clamp(snap(x), 0.0, static_cast<double>(d.nx - 1));
  y = std::clamp(snap(y), 0.0, static_cast<double>(d.ny - 1));
  z = std::clamp(snap(z), 0.0, static_cast<double>(d.nz - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int z0 = static_cast<int>(std::floor(z));
  const int x1 = std::min(x0 + 1, d.nx - 1);
  const int y1 = std::min(y0 + 1, d.ny - 1);
  const int z1 = std::min(z0 + 1, d.nz - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double fz = z - z0;
  if (fx == 0.0 && fy == 0.0 && fz == 0.0) return grid.at(x0, y0, z0);

  const double c00 = grid.at(x0, y0, z0) * (1 - fx) + grid.at(x1, y0, z0) * fx;
  const double c10 = grid.at(x0, y1, z0) * (1 - fx) + grid.at(x1, y1, z0) * fx;
  const double c01 = grid.at(x0, y0, z1) * (1 - fx) + grid.at(x1, y0, z1) * fx;
  const double c11 = grid.at(x0, y1, z1) * (1 - fx) + grid.at(x1, y1, z1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

VoxelGrid trilinear_resample(const VoxelGrid& grid, Dims target) {
  validate_dims(target);
  const Dims& d = grid.dims();
  if (target == d) return grid;
  Spacing sp{grid.spacing().dx * d.nx / target.nx, grid.spacing().dy * d.ny / target.ny,
             grid.spacing().dz * d.nz / target.nz};
  VoxelGrid out(target, sp, 0.0);
  for (int z = 0; z < target.nz; ++z) {
    const double sz = source_coord(z, d.nz, target.nz);
    for (int y = 0; y < target.ny; ++y) {
      const double sy = source_coord(y, d.ny, target.ny);
      for (int x = 0; x < target.nx; ++x) {
        out.at(x, y, z) = sample_trilinear(grid, source_coord(x, d.nx, target.nx), sy, sz);
      }
    }
  }
  return out;
}

Mask label_mask(const LabelVolume& labels, std::uint8_t label) {
  Mask m(labels.dims(), labels.spacing(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == label ? 1 : 0;
  return m;
}

CompositeRegions composite_regions(const LabelVolume& labels, const LabelScheme& scheme) {
  Mask tc(labels.dims(), labels.spacing(), 0);
  Mask wt(labels.dims(), labels.spacing(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint8_t v = labels[i];
    const bool core = v == scheme.et || v == scheme.net || v == scheme.cc;
    tc[i] = core ? 1 : 0;
    wt[i] = (core || v == scheme.ed) ? 1 : 0;
  }
  return {std::move(tc), std::move(wt)};
}

std::size_t count_nonzero(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](auto v) { return v != 0; }));
}

}  // namespace pedseg
