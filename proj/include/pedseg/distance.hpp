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

#include <vector>

#include "pedseg/volume.hpp"

namespace pedseg {

/// Exact Euclidean distance (mm) from every voxel centre to the nearest voxel
/// of `targets`, with per-axis spacing. Infinity everywhere when `targets` is
/// empty. Separable lower-envelope algorithm of Felzenszwalb and Huttenlocher.
std::vector<double> distance_to(const Mask& targets);

/// Squared variant; avoids the final square root.
std::vector<double> squared_distance_to(const Mask& targets);

}  // namespace pedseg
