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

#include "pedseg/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pedseg/simd/kernels.hpp"

namespace pedseg {

void RatioThresholds::validate() const {
  if (!(lower > 0.0 && lower < upper)) fail(Errc::InvalidArgument, "ratio thresholds need 0 < lower < upper");
  if (!(exclusion_low < exclusion_high)) fail(Errc::InvalidArgument, "exclusion band needs low < high");
}

RatioMap t1ce_t1_ratio(const VoxelGrid& t1ce, const VoxelGrid& t1, double guard) {
  require_same_dims(t1ce, t1, "t1ce_t1_ratio");
  std::vector<double> values(t1.size());
  std::vector<std::uint8_t> excluded(t1.size());
  simd::active().guarded_div(t1ce.data().data(), t1.data().data(), values.data(), excluded.data(), t1.size(), guard);
  return {VoxelGrid(t1.dims(), t1.spacing(), std::move(values)), std::move(excluded)};
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) fail(Errc::EmptyClass, "percentile of an empty sample");
  if (!(percentile >= 0.0 && percentile <= 100.0)) fail(Errc::InvalidArgument, "percentile must be in [0, 100]");
  const auto n = values.size();
  // The relative slack absorbs rounding in p*n so 95% of 100 is rank 95, not 96.
  const double scaled = percentile * static_cast<double>(n) / 100.0;
  auto rank = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

std::vector<double> in_band_ratios(const RatioMap& ratio, const LabelVolume& labels, std::uint8_t label,
                                   const RatioThresholds& band) {
  require_same_dims(ratio.values, labels, "in_band_ratios");
  std::vector<double> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != label || ratio.excluded[i]) continue;
    const double r = ratio.values[i];
    if (band.in_band(r)) out.push_back(r);
  }
  return out;
}

RatioStatistics ratio_statistics(const std::vector<double>& net_ratios, const std::vector<double>& et_ratios,
                                 const RatioPercentiles& percentiles) {
  if (net_ratios.empty()) fail(Errc::EmptyClass, "no in-band NET ratios");
  if (et_ratios.empty()) fail(Errc::EmptyClass, "no in-band ET ratios");
  RatioStatistics s;
  s.upper = nearest_rank_percentile(net_ratios, percentiles.net_upper);
  s.lower = nearest_rank_percentile(et_ratios, percentiles.et_lower);
  s.net_samples = net_ratios.size();
  s.et_samples = et_ratios.size();
  return s;
}

RatioStatistics ratio_statistics(const RatioMap& ratio, const LabelVolume& labels, const RatioThresholds& band,
                                 const RatioPercentiles& percentiles, const LabelScheme& scheme) {
  return ratio_statistics(in_band_ratios(ratio, labels, scheme.net, band),
                          in_band_ratios(ratio, labels, scheme.et, band), percentiles);
}

LabelVolume relabel_by_ratio(const LabelVolume& labels, const RatioMap& ratio, const RatioThresholds& th,
                             const LabelScheme& scheme, RelabelCounts* counts) {
  require_same_dims(labels, ratio.values, "relabel_by_ratio");
  LabelVolume out = labels;
  RelabelCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (ratio.excluded[i]) continue;
    const double r = ratio.values[i];
    if (labels[i] == scheme.net && r > th.upper) {
      out[i] = scheme.et;
      ++c.net_to_et;
    } else if (labels[i] == scheme.et && r < th.lower) {
      out[i] = scheme.net;
      ++c.et_to_net;
    }
  }
  if (counts) *counts = c;
  return out;
}

RocCurve roc_curve(std::span<const ScoredSample> samples) {
  std::size_t pos = 0, neg = 0;
  for (const auto& s : samples) (s.positive ? pos : neg)++;
  if (pos == 0 || neg == 0) fail(Errc::SingleClass, "ROC needs samples of both classes");

  std::vector<ScoredSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double thr = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == thr; ++i) (sorted[i].positive ? tp : fp)++;
    curve.points.push_back({thr, static_cast<double>(tp) / static_cast<double>(pos),
                            static_cast<double>(fp) / static_cast<double>(neg)});
  }
  double auc = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  curve.auc = auc;
  return curve;
}

std::string roc_csv(const RocCurve& curve) {
  std::ostringstream os;
  os.precision(17);
  os << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    if (std::isinf(p.threshold)) os << "inf";
    else os << p.threshold;
    os << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  return os.str();
}

PostprocessConfig PostprocessConfig::from(const KeyValueConfig& cfg) {
  PostprocessConfig c;
  c.normalize_inputs = cfg.get_bool("normalize_inputs", c.normalize_inputs);
  if (const auto region = cfg.raw("normalize_region")) {
    if (*region == "foreground") c.normalize_region = NormalizeRegion::Foreground;
    else if (*region == "whole") c.normalize_region = NormalizeRegion::WholeVolume;
    else fail(Errc::ConfigError, "normalize_region must be 'foreground' or 'whole'");
  }
  c.relabel_enabled = cfg.get_bool("relabel", c.relabel_enabled);
  c.thresholds.upper = cfg.get_double("ratio_upper", c.thresholds.upper);
  c.thresholds.lower = cfg.get_double("ratio_lower", c.thresholds.lower);
  const auto band = cfg.get_range("exclusion", {c.thresholds.exclusion_low, c.thresholds.exclusion_high});
  c.thresholds.exclusion_low = band.first;
  c.thresholds.exclusion_high = band.second;
  c.percentiles.net_upper = cfg.get_double("percentile_upper", c.percentiles.net_upper);
  c.percentiles.et_lower = cfg.get_double("percentile_lower", c.percentiles.et_lower);
  c.ratio_guard = cfg.get_double("ratio_guard", c.ratio_guard);
  c.volume_thresholds = cfg.get_label_map("volume_thresholds", c.volume_thresholds);
  try {
    if (c.relabel_enabled) c.thresholds.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigError, e.what());
  }
  for (const auto& [label, v] : c.volume_thresholds) {
    if (!(v >= 0.0)) fail(Errc::ConfigError, "volume thresholds must be nonnegative");
  }
  return c;
}

nlohmann::json PostprocessConfig::to_json() const {
  nlohmann::json vt = nlohmann::json::object();
  for (const auto& [label, v] : volume_thresholds) vt[std::to_string(label)] = v;
  return {{"normalize_inputs", normalize_inputs},
          {"normalize_region", normalize_region == NormalizeRegion::Foreground ? "foreground" : "whole"},
          {"relabel", relabel_enabled},
          {"ratio_upper", thresholds.upper},
          {"ratio_lower", thresholds.lower},
          {"exclusion", {thresholds.exclusion_low, thresholds.exclusion_high}},
          {"percentile_upper", percentiles.net_upper},
          {"percentile_lower", percentiles.et_lower},
          {"ratio_guard", ratio_guard},
          {"volume_thresholds", vt}};
}

PostprocessResult postprocess_pipeline(const LabelVolume& labels, const VoxelGrid& t1ce, const VoxelGrid& t1,
                                       const PostprocessConfig& config) {
  require_same_dims(labels, t1ce, "postprocess_pipeline (seg vs t1ce)");
  require_same_dims(labels, t1, "postprocess_pipeline (seg vs t1)");
  PostprocessResult result{labels, {}, {}};
  if (config.relabel_enabled) {
    config.thresholds.validate();
    const RatioMap ratio = config.normalize_inputs
                               ? t1ce_t1_ratio(zscore_normalize(t1ce, config.normalize_region),
                                               zscore_normalize(t1, config.normalize_region), config.ratio_guard)
                               : t1ce_t1_ratio(t1ce, t1, config.ratio_guard);
    result.labels = relabel_by_ratio(labels, ratio, config.thresholds, config.scheme, &result.relabeled);
  }
  if (!config.volume_thresholds.empty()) {
    ComponentRemoval removal = remove_small_components_report(result.labels, config.volume_thresholds);
    result.labels = std::move(removal.labels);
    result.removed = std::move(removal.removed);
  }
  return result;
}

nlohmann::json to_json(const PostprocessResult& result) {
  nlohmann::json removed = nlohmann::json::array();
  std::map<std::string, int> per_label;
  for (const auto& r : result.removed) {
    removed.push_back({{"label", r.label}, {"voxels", r.voxels}, {"volume_mm3", r.volume_mm3}});
    per_label[std::to_string(r.label)] += 1;
  }
  return {{"relabeled", {{"net_to_et", result.relabeled.net_to_et}, {"et_to_net", result.relabeled.et_to_net}}},
          {"components_removed", removed},
          {"components_removed_per_label", per_label}};
}

}  // namespace pedseg
