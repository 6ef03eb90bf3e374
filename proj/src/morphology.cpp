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

#include "pedseg/morphology.hpp"

#include <array>
#include <queue>

#include "pedseg/simd/kernels.hpp"

namespace pedseg {
namespace {

struct Offset {
  int dx, dy, dz;
};

std::vector<Offset> neighbourhood(Connectivity c) {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (c == Connectivity::Six && manhattan != 1) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

}  // namespace

ComponentLabeling connected_components(const Mask& mask, Connectivity connectivity) {
  const Dims d = mask.dims();
  ComponentLabeling out;
  out.dims = d;
  out.ids.assign(mask.size(), 0);
  const auto offsets = neighbourhood(connectivity);
  const double voxel_mm3 = mask.spacing().voxel_volume();

  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || out.ids[seed] != 0) continue;
    const std::int32_t id = ++out.count;
    std::size_t voxels = 0;
    out.ids[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++voxels;
      const int x = static_cast<int>(cur % static_cast<std::size_t>(d.nx));
      const int y = static_cast<int>((cur / static_cast<std::size_t>(d.nx)) % static_cast<std::size_t>(d.ny));
      const int z = static_cast<int>(cur / (static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny)));
      for (const Offset& o : offsets) {
        const int nx = x + o.dx, ny = y + o.dy, nz = z + o.dz;
        if (!mask.contains(nx, ny, nz)) continue;
        const std::size_t ni = mask.index(nx, ny, nz);
        if (mask[ni] && out.ids[ni] == 0) {
          out.ids[ni] = id;
          stack.push_back(ni);
        }
      }
    }
    out.voxel_counts.push_back(voxels);
    out.volumes_mm3.push_back(static_cast<double>(voxels) * voxel_mm3);
  }
  return out;
}

namespace {

// One pass of a 3-wide OR along an axis whose neighbours sit `stride` apart,
// within lines of `extent` elements.
void dilate_axis(const std::vector<std::uint8_t>& in, std::vector<std::uint8_t>& out, const Dims& d, int axis) {
  out = in;
  const std::size_t nx = static_cast<std::size_t>(d.nx);
  const std::size_t ny = static_cast<std::size_t>(d.ny);
  const std::size_t nz = static_cast<std::size_t>(d.nz);
  auto& k = simd::active();
  if (axis == 0) {
    if (nx < 2) return;
    for (std::size_t row = 0; row < ny * nz; ++row) {
      const std::uint8_t* src = in.data() + row * nx;
      std::uint8_t* dst = out.data() + row * nx;
      k.or_bytes(src + 1, dst, nx - 1);
      k.or_bytes(src, dst + 1, nx - 1);
    }
  } else if (axis == 1) {
    if (ny < 2) return;
    for (std::size_t z = 0; z < nz; ++z) {
      const std::uint8_t* src = in.data() + z * nx * ny;
      std::uint8_t* dst = out.data() + z * nx * ny;
      k.or_bytes(src + nx, dst, nx * (ny - 1));
      k.or_bytes(src, dst + nx, nx * (ny - 1));
    }
  } else {
    if (nz < 2) return;
    const std::size_t slice = nx * ny;
    k.or_bytes(in.data() + slice, out.data(), slice * (nz - 1));
    k.or_bytes(in.data(), out.data() + slice, slice * (nz - 1));
  }
}

}  // namespace

Mask dilate(const Mask& mask, int iterations) {
  std::vector<std::uint8_t> a(mask.data().begin(), mask.data().end());
  std::vector<std::uint8_t> b;
  for (int it = 0; it < iterations; ++it) {
    // The 3x3x3 box is separable into three 3-tap passes.
    dilate_axis(a, b, mask.dims(), 0);
    dilate_axis(b, a, mask.dims(), 1);
    dilate_axis(a, b, mask.dims(), 2);
    a.swap(b);
  }
  return Mask(mask.dims(), mask.spacing(), std::move(a));
}

Mask boundary(const Mask& mask) {
  const Dims d = mask.dims();
  Mask out(d, mask.spacing(), 0);
  static const std::array<Offset, 6> face{{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        if (!mask.at(x, y, z)) continue;
        for (const Offset& o : face) {
          const int nx = x + o.dx, ny = y + o.dy, nz = z + o.dz;
          if (!mask.contains(nx, ny, nz) || !mask.at(nx, ny, nz)) {
            out.at(x, y, z) = 1;
            break;
          }
        }
      }
    }
  }
  return out;
}

ComponentRemoval remove_small_components_report(const LabelVolume& labels,
                                                const std::map<std::uint8_t, double>& thresholds_mm3) {
  ComponentRemoval result{labels, {}};
  const double voxel_mm3 = labels.spacing().voxel_volume();
  for (const auto& [label, threshold] : thresholds_mm3) {
    if (!(threshold >= 0.0)) fail(Errc::InvalidArgument, "volume thresholds must be nonnegative");
    const Mask original = label_mask(labels, label);
    if (count_nonzero(original) == 0) continue;
    const ComponentLabeling groups = connected_components(dilate(original), Connectivity::TwentySix);

    std::vector<std::size_t> group_voxels(static_cast<std::size_t>(groups.count), 0);
    for (std::size_t i = 0; i < original.size(); ++i) {
      if (original[i]) ++group_voxels[static_cast<std::size_t>(groups.ids[i] - 1)];
    }
    std::vector<bool> drop(group_voxels.size(), false);
    for (std::size_t g = 0; g < group_voxels.size(); ++g) {
      const double volume = static_cast<double>(group_voxels[g]) * voxel_mm3;
      if (volume < threshold) {
        drop[g] = true;
        result.removed.push_back({label, group_voxels[g], volume});
      }
    }
    for (std::size_t i = 0; i < original.size(); ++i) {
      if (original[i] && drop[static_cast<std::size_t>(groups.ids[i] - 1)]) result.labels[i] = 0;
    }
  }
  return result;
}

LabelVolume remove_small_components(const LabelVolume& labels, const std::map<std::uint8_t, double>& thresholds_mm3) {
  return remove_small_components_report(labels, thresholds_mm3).labels;
}

}  // namespace pedseg
