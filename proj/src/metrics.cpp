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

#include "pedseg/metrics.hpp"

#include <algorithm>
#include <set>

#include "pedseg/distance.hpp"

namespace pedseg {

double voxel_dice(const Mask& pred, const Mask& gt) {
  require_same_dims(pred, gt, "voxel_dice");
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p += pred[i];
    g += gt[i];
    inter += pred[i] & gt[i];
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

namespace {

struct Box {
  int x0, y0, z0, x1, y1, z1;  // inclusive
};

// Crops both masks to the union of their bounding boxes grown by `pad`.
std::pair<Mask, Mask> crop_pair(const Mask& a, const Mask& b, int pad) {
  const Dims d = a.dims();
  Box box{d.nx, d.ny, d.nz, -1, -1, -1};
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!a.at(x, y, z) && !b.at(x, y, z)) continue;
        box.x0 = std::min(box.x0, x), box.y0 = std::min(box.y0, y), box.z0 = std::min(box.z0, z);
        box.x1 = std::max(box.x1, x), box.y1 = std::max(box.y1, y), box.z1 = std::max(box.z1, z);
      }
  box.x0 = std::max(0, box.x0 - pad), box.y0 = std::max(0, box.y0 - pad), box.z0 = std::max(0, box.z0 - pad);
  box.x1 = std::min(d.nx - 1, box.x1 + pad), box.y1 = std::min(d.ny - 1, box.y1 + pad);
  box.z1 = std::min(d.nz - 1, box.z1 + pad);
  const Dims cd{box.x1 - box.x0 + 1, box.y1 - box.y0 + 1, box.z1 - box.z0 + 1};
  Mask ca(cd, a.spacing(), 0), cb(cd, a.spacing(), 0);
  for (int z = 0; z < cd.nz; ++z)
    for (int y = 0; y < cd.ny; ++y)
      for (int x = 0; x < cd.nx; ++x) {
        ca.at(x, y, z) = a.at(x + box.x0, y + box.y0, z + box.z0);
        cb.at(x, y, z) = b.at(x + box.x0, y + box.y0, z + box.z0);
      }
  return {std::move(ca), std::move(cb)};
}

double fraction_within(const Mask& from_boundary, const std::vector<double>& dist_to_other, double tol,
                       std::size_t& count) {
  std::size_t within = 0;
  count = 0;
  for (std::size_t i = 0; i < from_boundary.size(); ++i) {
    if (!from_boundary[i]) continue;
    ++count;
    if (dist_to_other[i] <= tol) ++within;
  }
  return count ? static_cast<double>(within) / static_cast<double>(count) : 0.0;
}

}  // namespace

double surface_distance_nsd(const Mask& pred, const Mask& gt, double tolerance_mm) {
  require_same_dims(pred, gt, "surface_distance_nsd");
  if (!(tolerance_mm > 0.0)) fail(Errc::InvalidArgument, "NSD tolerance must be > 0");
  const bool p_empty = count_nonzero(pred) == 0;
  const bool g_empty = count_nonzero(gt) == 0;
  if (p_empty && g_empty) return 1.0;
  if (p_empty || g_empty) return 0.0;

  // Boundary voxels beyond tolerance of both sets never matter, so work on the
  // union bounding box with one voxel of margin (keeps boundaries identical).
  auto [p, g] = crop_pair(pred, gt, 1);
  const Mask bp = boundary(p);
  const Mask bg = boundary(g);
  const auto to_bg = distance_to(bg);
  const auto to_bp = distance_to(bp);
  std::size_t np = 0, ng = 0;
  const double fp = fraction_within(bp, to_bg, tolerance_mm, np);
  const double fg = fraction_within(bg, to_bp, tolerance_mm, ng);
  return 0.5 * (fp + fg);
}

LesionClassResult lesion_wise(const Mask& pred, const Mask& gt, const LesionMatchConfig& config) {
  require_same_dims(pred, gt, "lesion_wise");
  LesionClassResult out;

  const Mask gt_dilated = dilate(gt, config.gt_dilation_iterations);
  const ComponentLabeling gt_cc = connected_components(gt_dilated, Connectivity::TwentySix);
  const ComponentLabeling pred_cc = connected_components(pred, Connectivity::TwentySix);

  // Original GT voxels and touching prediction components per dilated lesion.
  const auto n_gt = static_cast<std::size_t>(gt_cc.count);
  std::vector<std::size_t> gt_voxels(n_gt, 0);
  std::vector<std::set<std::int32_t>> touching(n_gt);
  std::vector<bool> pred_matched(static_cast<std::size_t>(pred_cc.count), false);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::int32_t g = gt_cc.ids[i];
    if (g == 0) continue;
    if (gt[i]) ++gt_voxels[static_cast<std::size_t>(g - 1)];
    const std::int32_t p = pred_cc.ids[i];
    if (p != 0) touching[static_cast<std::size_t>(g - 1)].insert(p);
  }

  double dice_sum = 0.0, nsd_sum = 0.0;
  for (std::size_t j = 0; j < n_gt; ++j) {
    if (gt_voxels[j] < std::max<std::size_t>(config.min_gt_lesion_voxels, 1)) continue;
    for (std::int32_t p : touching[j]) pred_matched[static_cast<std::size_t>(p - 1)] = true;

    const auto id = static_cast<std::int32_t>(j + 1);
    Mask lesion(gt.dims(), gt.spacing(), 0);
    Mask matched(gt.dims(), gt.spacing(), 0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      lesion[i] = (gt[i] && gt_cc.ids[i] == id) ? 1 : 0;
      matched[i] = (pred_cc.ids[i] != 0 && touching[j].count(pred_cc.ids[i])) ? 1 : 0;
    }
    LesionScore s;
    s.gt_voxels = gt_voxels[j];
    s.pred_voxels = count_nonzero(matched);
    s.volume_mm3 = static_cast<double>(gt_voxels[j]) * gt.spacing().voxel_volume();
    s.dice = voxel_dice(matched, lesion);
    s.nsd = surface_distance_nsd(matched, lesion, config.nsd_tolerance_mm);
    dice_sum += s.dice;
    nsd_sum += s.nsd;
    out.lesions.push_back(s);
  }
  out.gt_lesion_count = static_cast<int>(out.lesions.size());
  // Prediction components that touch an ignored (too small) GT lesion are not
  // counted as false positives either.
  for (std::size_t j = 0; j < n_gt; ++j) {
    for (std::int32_t p : touching[j]) pred_matched[static_cast<std::size_t>(p - 1)] = true;
  }
  out.fp_lesion_count = static_cast<int>(std::count(pred_matched.begin(), pred_matched.end(), false));

  const int denom = out.gt_lesion_count + out.fp_lesion_count;
  if (denom == 0) {
    out.lesion_wise_dice = 1.0;
    out.lesion_wise_nsd = 1.0;
  } else {
    out.lesion_wise_dice = dice_sum / denom;
    out.lesion_wise_nsd = nsd_sum / denom;
  }
  return out;
}

std::string region_name(Region r) {
  switch (r) {
    case Region::CC: return "CC";
    case Region::ED: return "ED";
    case Region::ET: return "ET";
    case Region::NET: return "NET";
    case Region::TC: return "TC";
    case Region::WT: return "WT";
  }
  return "?";
}

Mask region_mask(const LabelVolume& labels, Region r, const LabelScheme& scheme) {
  switch (r) {
    case Region::CC: return label_mask(labels, scheme.cc);
    case Region::ED: return label_mask(labels, scheme.ed);
    case Region::ET: return label_mask(labels, scheme.et);
    case Region::NET: return label_mask(labels, scheme.net);
    case Region::TC: return composite_regions(labels, scheme).tumor_core;
    case Region::WT: return composite_regions(labels, scheme).whole_tumor;
  }
  fail(Errc::InvalidArgument, "unknown region");
}

double LesionReport::mean_dice() const {
  double s = 0.0;
  for (const auto& r : regions) s += r.lesion_wise_dice;
  return s / static_cast<double>(regions.size());
}

double LesionReport::mean_nsd() const {
  double s = 0.0;
  for (const auto& r : regions) s += r.lesion_wise_nsd;
  return s / static_cast<double>(regions.size());
}

LesionReport evaluate_case(const LabelVolume& pred, const LabelVolume& gt, const LabelScheme& scheme,
                           const LesionMatchConfig& config) {
  require_same_dims(pred, gt, "evaluate_case");
  LesionReport report;
  for (std::size_t k = 0; k < kReportRegions.size(); ++k) {
    report.regions[k] =
        lesion_wise(region_mask(pred, kReportRegions[k], scheme), region_mask(gt, kReportRegions[k], scheme), config);
  }
  return report;
}

nlohmann::json to_json(const LesionClassResult& r) {
  nlohmann::json lesions = nlohmann::json::array();
  for (const auto& l : r.lesions) {
    lesions.push_back({{"dice", l.dice},
                       {"nsd", l.nsd},
                       {"gt_voxels", l.gt_voxels},
                       {"pred_voxels", l.pred_voxels},
                       {"volume_mm3", l.volume_mm3}});
  }
  return {{"lesion_wise_dice", r.lesion_wise_dice},
          {"lesion_wise_nsd", r.lesion_wise_nsd},
          {"gt_lesion_count", r.gt_lesion_count},
          {"fp_lesion_count", r.fp_lesion_count},
          {"lesions", lesions}};
}

nlohmann::json to_json(const LesionReport& report) {
  nlohmann::json dice, nsd, detail;
  for (std::size_t k = 0; k < kReportRegions.size(); ++k) {
    const std::string name = region_name(kReportRegions[k]);
    dice[name] = report.regions[k].lesion_wise_dice;
    nsd[name] = report.regions[k].lesion_wise_nsd;
    detail[name] = to_json(report.regions[k]);
  }
  return {{"columns", {"CC", "ED", "ET", "NET", "TC", "WT"}},
          {"lesion_wise_dice", dice},
          {"lesion_wise_nsd", nsd},
          {"mean", {{"lesion_wise_dice", report.mean_dice()}, {"lesion_wise_nsd", report.mean_nsd()}}},
          {"regions", detail}};
}

}  // namespace pedseg
