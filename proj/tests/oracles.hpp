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

// Naive reference implementations used as test oracles. They share no code
// with the library beyond the container types.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "pedseg/volume.hpp"

namespace oracle {

using pedseg::Dims;
using pedseg::LabelVolume;
using pedseg::Mask;
using pedseg::Spacing;

inline bool adjacent(int dx, int dy, int dz, int connectivity) {
  const int n = std::abs(dx) + std::abs(dy) + std::abs(dz);
  if (n == 0) return false;
  return connectivity == 26 || n == 1;
}

struct Components {
  std::vector<int> ids;  // 0 background, else 1..count in scan order of first voxel
  int count = 0;
};

/// Breadth-first flood fill from each unvisited foreground voxel.
inline Components flood_fill(const Mask& m, int connectivity = 26) {
  const Dims d = m.dims();
  Components c;
  c.ids.assign(m.size(), 0);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!m.at(x, y, z) || c.ids[m.index(x, y, z)]) continue;
        const int id = ++c.count;
        std::deque<std::array<int, 3>> q{{x, y, z}};
        c.ids[m.index(x, y, z)] = id;
        while (!q.empty()) {
          const auto [px, py, pz] = q.front();
          q.pop_front();
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                if (!adjacent(dx, dy, dz, connectivity)) continue;
                const int nx = px + dx, ny = py + dy, nz = pz + dz;
                if (!m.contains(nx, ny, nz) || !m.at(nx, ny, nz)) continue;
                int& slot = c.ids[m.index(nx, ny, nz)];
                if (slot) continue;
                slot = id;
                q.push_back({nx, ny, nz});
              }
        }
      }
  return c;
}

inline Mask dilate(const Mask& m) {
  Mask out(m.dims(), m.spacing());
  for (int z = 0; z < m.dims().nz; ++z)
    for (int y = 0; y < m.dims().ny; ++y)
      for (int x = 0; x < m.dims().nx; ++x) {
        bool any = false;
        for (int dz = -1; dz <= 1 && !any; ++dz)
          for (int dy = -1; dy <= 1 && !any; ++dy)
            for (int dx = -1; dx <= 1 && !any; ++dx)
              any = m.contains(x + dx, y + dy, z + dz) && m.at(x + dx, y + dy, z + dz);
        out.at(x, y, z) = any;
      }
  return out;
}

inline double dice(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  const std::set<std::size_t> sa(a.begin(), a.end());
  std::size_t inter = 0;
  for (auto i : b) inter += sa.count(i);
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a.size() + b.size());
}

/// Lesion-wise Dice by exhaustive matching: every GT lesion (component of the
/// dilated GT) against every prediction component.
inline double lesion_wise_dice(const Mask& pred, const Mask& gt) {
  const Mask gd = dilate(gt);
  const Components gc = flood_fill(gd);
  const Components pc = flood_fill(pred);
  if (gc.count == 0 && pc.count == 0) return 1.0;
  std::vector<bool> pred_matched(static_cast<std::size_t>(pc.count) + 1, false);
  double total = 0.0;
  for (int g = 1; g <= gc.count; ++g) {
    std::vector<std::size_t> gt_voxels;
    std::set<int> touching;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gc.ids[i] != g) continue;
      if (gt[i]) gt_voxels.push_back(i);
      if (pc.ids[i]) touching.insert(pc.ids[i]);
    }
    std::vector<std::size_t> pred_voxels;
    for (int p : touching) {
      pred_matched[p] = true;
      for (std::size_t i = 0; i < pred.size(); ++i)
        if (pc.ids[i] == p) pred_voxels.push_back(i);
    }
    total += dice(gt_voxels, pred_voxels);
  }
  int fp = 0;
  for (int p = 1; p <= pc.count; ++p) fp += !pred_matched[p];
  return total / static_cast<double>(gc.count + fp);
}

/// Distance from every voxel to the nearest target voxel by enumeration.
inline std::vector<double> brute_distance(const Mask& targets) {
  const Dims d = targets.dims();
  const Spacing s = targets.spacing();
  std::vector<std::array<int, 3>> pts;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x)
        if (targets.at(x, y, z)) pts.push_back({x, y, z});
  std::vector<double> out(targets.size(), std::numeric_limits<double>::infinity());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : pts) {
          const double ex = (x - p[0]) * s.dx, ey = (y - p[1]) * s.dy, ez = (z - p[2]) * s.dz;
          best = std::min(best, ex * ex + ey * ey + ez * ez);
        }
        out[targets.index(x, y, z)] = std::sqrt(best);
      }
  return out;
}

/// Boundary voxels (foreground with a 6-neighbour outside the mask or volume).
inline Mask boundary(const Mask& m) {
  Mask out(m.dims(), m.spacing());
  static const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int z = 0; z < m.dims().nz; ++z)
    for (int y = 0; y < m.dims().ny; ++y)
      for (int x = 0; x < m.dims().nx; ++x) {
        if (!m.at(x, y, z)) continue;
        for (const auto& o : off) {
          const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
          if (!m.contains(nx, ny, nz) || !m.at(nx, ny, nz)) {
            out.at(x, y, z) = 1;
            break;
          }
        }
      }
  return out;
}

/// Symmetric NSD by all-pairs boundary enumeration.
inline double nsd(const Mask& a, const Mask& b, double tol) {
  const Mask ba = boundary(a), bb = boundary(b);
  const auto da = brute_distance(ba), db = brute_distance(bb);
  std::size_t na = 0, nb = 0, ok_a = 0, ok_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (ba[i]) {
      ++na;
      ok_a += db[i] <= tol;
    }
    if (bb[i]) {
      ++nb;
      ok_b += da[i] <= tol;
    }
  }
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  return 0.5 * (static_cast<double>(ok_a) / na + static_cast<double>(ok_b) / nb);
}

/// AUC as the Mann-Whitney probability that a positive outranks a negative,
/// ties counting one half.
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Random volume whose voxels are foreground with probability `density`,
/// with labels drawn from `labels`.
inline LabelVolume random_labels(Dims d, Spacing s, double density, const std::vector<std::uint8_t>& labels,
                                 std::mt19937_64& rng) {
  LabelVolume v(d, s);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = u(rng) < density ? labels[pick(rng)] : 0;
  return v;
}

inline Mask random_mask(Dims d, Spacing s, double density, std::mt19937_64& rng) {
  Mask m(d, s);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng) < density;
  return m;
}

}  // namespace oracle
