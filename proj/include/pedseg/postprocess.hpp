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
#include <span>
#include <vector>

#include <json.hpp>

#include "pedseg/config.hpp"
#include "pedseg/morphology.hpp"
#include "pedseg/volume.hpp"

namespace pedseg {

struct RatioThresholds {
  double upper = 1.388;  // NET -> ET when the ratio exceeds this
  double lower = 0.766;  // ET -> NET when the ratio falls below this
  double exclusion_low = 0.2;
  double exclusion_high = 5.0;

  void validate() const;
  bool in_band(double r) const { return r >= exclusion_low && r <= exclusion_high; }
};

/// Voxel-wise T1CE / T1. Voxels whose denominator is within the guard band
/// are flagged as excluded: they hold 0, never enter statistics and never
/// trigger relabeling.
struct RatioMap {
  VoxelGrid values;
  std::vector<std::uint8_t> excluded;
};

inline constexpr double kDefaultRatioGuard = 1e-6;

RatioMap t1ce_t1_ratio(const VoxelGrid& t1ce, const VoxelGrid& t1, double guard = kDefaultRatioGuard);

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (rank
/// clamped to [1, n]). `percentile` is in [0, 100].
double nearest_rank_percentile(std::vector<double> values, double percentile);

struct RatioPercentiles {
  double net_upper = 95.0;  // percentile of NET ratios giving the upper threshold
  double et_lower = 5.0;    // percentile of ET ratios giving the lower threshold
};

struct RatioStatistics {
  double upper = 0.0;
  double lower = 0.0;
  std::size_t net_samples = 0;
  std::size_t et_samples = 0;
};

/// In-band, non-excluded ratios at voxels carrying `label`.
std::vector<double> in_band_ratios(const RatioMap& ratio, const LabelVolume& labels, std::uint8_t label,
                                   const RatioThresholds& band);

RatioStatistics ratio_statistics(const RatioMap& ratio, const LabelVolume& labels, const RatioThresholds& band,
                                 const RatioPercentiles& percentiles = {}, const LabelScheme& scheme = {});
/// Same, from already pooled samples (cohort statistics).
RatioStatistics ratio_statistics(const std::vector<double>& net_ratios, const std::vector<double>& et_ratios,
                                 const RatioPercentiles& percentiles = {});

struct RelabelCounts {
  std::size_t net_to_et = 0;
  std::size_t et_to_net = 0;
};

/// Single pass over the input labels: NET with ratio > upper becomes ET, ET
/// with ratio < lower becomes NET.
LabelVolume relabel_by_ratio(const LabelVolume& labels, const RatioMap& ratio, const RatioThresholds& th,
                             const LabelScheme& scheme = {}, RelabelCounts* counts = nullptr);

struct ScoredSample {
  double score = 0.0;
  bool positive = false;  // ET
};

struct RocPoint {
  double threshold = 0.0;  // predicted positive when score >= threshold
  double tpr = 0.0;
  double fpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0, 0) with threshold +inf
  double auc = 0.0;
};

RocCurve roc_curve(std::span<const ScoredSample> samples);

/// ROC points as "threshold,fpr,tpr" CSV.
std::string roc_csv(const RocCurve& curve);

struct PostprocessConfig {
  bool normalize_inputs = true;
  NormalizeRegion normalize_region = NormalizeRegion::Foreground;
  bool relabel_enabled = true;
  RatioThresholds thresholds;
  RatioPercentiles percentiles;
  double ratio_guard = kDefaultRatioGuard;
  std::map<std::uint8_t, double> volume_thresholds{{1, 160.0}, {3, 50.0}};
  LabelScheme scheme;

  static PostprocessConfig from(const KeyValueConfig& cfg);
  nlohmann::json to_json() const;
};

struct PostprocessResult {
  LabelVolume labels;
  RelabelCounts relabeled;
  std::vector<RemovedComponent> removed;
};

/// Ratio relabeling followed by small-component removal.
PostprocessResult postprocess_pipeline(const LabelVolume& labels, const VoxelGrid& t1ce, const VoxelGrid& t1,
                                       const PostprocessConfig& config);

nlohmann::json to_json(const PostprocessResult& result);

}  // namespace pedseg
