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
#include <string>
#include <vector>

#include <json.hpp>

#include "pedseg/morphology.hpp"
#include "pedseg/volume.hpp"

namespace pedseg {

/// 2|P n G| / (|P| + |G|), 1 when both are empty.
double voxel_dice(const Mask& pred, const Mask& gt);

/// Symmetric normalized surface distance: for each mask, the fraction of its
/// boundary voxels within `tolerance_mm` of the other mask's boundary; the
/// two fractions are averaged. Both empty gives 1, one empty gives 0.
double surface_distance_nsd(const Mask& pred, const Mask& gt, double tolerance_mm);

struct LesionMatchConfig {
  int gt_dilation_iterations = 1;
  std::size_t min_gt_lesion_voxels = 0;  // GT lesions smaller than this are ignored
  double nsd_tolerance_mm = 1.0;
};

struct LesionScore {
  std::size_t gt_voxels = 0;
  std::size_t pred_voxels = 0;  // voxels of the matched prediction union
  double volume_mm3 = 0.0;
  double dice = 0.0;
  double nsd = 0.0;
};

struct LesionClassResult {
  double lesion_wise_dice = 1.0;
  double lesion_wise_nsd = 1.0;
  int gt_lesion_count = 0;
  int fp_lesion_count = 0;
  std::vector<LesionScore> lesions;  // one per GT lesion, in component id order
};

/// Lesion matching: dilate GT once, label 26-components of the dilated GT and
/// of the prediction, score each GT lesion against the union of prediction
/// components touching its dilated extent, count untouched prediction
/// components as false-positive lesions scoring 0, and average over
/// GT + FP lesions.
LesionClassResult lesion_wise(const Mask& pred, const Mask& gt, const LesionMatchConfig& config = {});

inline double lesion_wise_dice(const Mask& pred, const Mask& gt, const LesionMatchConfig& config = {}) {
  return lesion_wise(pred, gt, config).lesion_wise_dice;
}

/// Evaluation regions in report column order.
enum class Region { CC, ED, ET, NET, TC, WT };
inline constexpr std::array<Region, 6> kReportRegions{Region::CC, Region::ED, Region::ET,
                                                      Region::NET, Region::TC, Region::WT};
std::string region_name(Region r);
Mask region_mask(const LabelVolume& labels, Region r, const LabelScheme& scheme = {});

struct LesionReport {
  std::array<LesionClassResult, 6> regions;  // indexed like kReportRegions
  double mean_dice() const;
  double mean_nsd() const;
};

LesionReport evaluate_case(const LabelVolume& pred, const LabelVolume& gt, const LabelScheme& scheme = {},
                           const LesionMatchConfig& config = {});

nlohmann::json to_json(const LesionClassResult& r);
nlohmann::json to_json(const LesionReport& report);

}  // namespace pedseg
