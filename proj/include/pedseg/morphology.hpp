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
#include <map>
#include <vector>

#include "pedseg/volume.hpp"

namespace pedseg {

enum class Connectivity { Six = 6, TwentySix = 26 };

/// Component ids per voxel, 0 for background, 1..count otherwise. Ids follow
/// the scan order of each component's smallest linear index.
struct ComponentLabeling {
  Dims dims;
  std::vector<std::int32_t> ids;
  int count = 0;
  std::vector<std::size_t> voxel_counts;  // [id - 1]
  std::vector<double> volumes_mm3;        // [id - 1]
};

ComponentLabeling connected_components(const Mask& mask, Connectivity connectivity = Connectivity::TwentySix);

/// Binary dilation with the full 3x3x3 kernel; the neighbourhood is clamped at
/// the volume border.
Mask dilate(const Mask& mask, int iterations = 1);

/// Foreground voxels with at least one 6-connected background neighbour.
/// Positions outside the volume count as background.
Mask boundary(const Mask& mask);

struct RemovedComponent {
  std::uint8_t label = 0;
  std::size_t voxels = 0;
  double volume_mm3 = 0.0;
};

struct ComponentRemoval {
  LabelVolume labels;
  std::vector<RemovedComponent> removed;
};

/// Per thresholded label: binarize, dilate once, take 26-components of the
/// dilated mask, group the original voxels by dilated component and clear
/// every group whose undilated volume is below the threshold (mm^3). Labels
/// without a threshold are untouched.
ComponentRemoval remove_small_components_report(const LabelVolume& labels,
                                                const std::map<std::uint8_t, double>& thresholds_mm3);
LabelVolume remove_small_components(const LabelVolume& labels, const std::map<std::uint8_t, double>& thresholds_mm3);

}  // namespace pedseg
