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

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pedseg/metrics.hpp"

using namespace pedseg;

namespace {

Mask cube(Dims d, int x0, int y0, int z0, int n, Spacing s = {}) {
  Mask m(d, s);
  for (int z = z0; z < z0 + n; ++z)
    for (int y = y0; y < y0 + n; ++y)
      for (int x = x0; x < x0 + n; ++x) m.at(x, y, z) = 1;
  return m;
}

Mask unite(const Mask& a, const Mask& b) {
  Mask m = a;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = a[i] | b[i];
  return m;
}

}  // namespace

TEST_CASE("voxel dice") {
  const Dims d{6, 6, 6};
  const Mask e(d, {});
  const Mask a = cube(d, 1, 1, 1, 2);
  CHECK(voxel_dice(e, e) == 1.0);
  CHECK(voxel_dice(a, a) == 1.0);
  Mask one(d, {});
  one.at(0, 0, 0) = 1;
  CHECK(voxel_dice(one, e) == 0.0);
  const Mask b = cube(d, 2, 1, 1, 2);
  CHECK(voxel_dice(a, b) == 0.5);
  CHECK(voxel_dice(a, b) == voxel_dice(b, a));
  CHECK_THROWS_AS(voxel_dice(a, Mask({5, 6, 6}, {})), Error);
}

TEST_CASE("surface distance") {
  const Dims d{8, 8, 8};
  const Mask a = cube(d, 2, 2, 2, 3);
  const Mask b = cube(d, 3, 2, 2, 3);
  const Mask e(d, {});
  CHECK(surface_distance_nsd(a, a, 1.0) == 1.0);
  CHECK(surface_distance_nsd(e, e, 1.0) == 1.0);
  CHECK(surface_distance_nsd(a, e, 1.0) == 0.0);
  // Unit cubes one voxel apart: every boundary voxel lies within 1 mm.
  const Mask u = cube(d, 2, 2, 2, 1), v = cube(d, 3, 2, 2, 1);
  CHECK(surface_distance_nsd(u, v, 1.0) == 1.0);
  CHECK(surface_distance_nsd(a, b, 1.0) == surface_distance_nsd(b, a, 1.0));

  std::mt19937_64 rng(17);
  for (int t = 0; t < 25; ++t) {
    const Spacing s{1.0, 0.5 + 0.5 * (t % 3), 2.0};
    const Mask p = oracle::random_mask({7, 7, 6}, s, 0.25, rng);
    const Mask g = oracle::random_mask({7, 7, 6}, s, 0.25, rng);
    const double tol = 0.5 + (t % 4);
    CHECK(std::abs(surface_distance_nsd(p, g, tol) - oracle::nsd(p, g, tol)) <= 1e-9);
  }
}

TEST_CASE("lesion-wise degenerate cases") {
  const Dims d{12, 12, 12};
  const Mask e(d, {});
  const Mask lesion = cube(d, 2, 2, 2, 3);
  const Mask far = cube(d, 8, 8, 8, 2);
  CHECK(lesion_wise_dice(e, e) == 1.0);
  CHECK(lesion_wise_dice(lesion, e) == 0.0);  // FP only
  CHECK(lesion_wise_dice(e, lesion) == 0.0);  // miss only
  CHECK(lesion_wise_dice(lesion, lesion) == 1.0);
  const auto r = lesion_wise(unite(lesion, far), lesion);
  CHECK(r.lesion_wise_dice == 0.5);
  CHECK(r.gt_lesion_count == 1);
  CHECK(r.fp_lesion_count == 1);
}

TEST_CASE("lesion-wise properties") {
  const Dims d{12, 12, 12};
  SUBCASE("single overlapping components reduce to voxel dice") {
    const Mask g = cube(d, 2, 2, 2, 4);
    const Mask p = cube(d, 3, 3, 2, 4);
    CHECK(lesion_wise_dice(p, g) == doctest::Approx(voxel_dice(p, g)).epsilon(1e-15));
  }
  SUBCASE("a disjoint extra component never helps") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 30; ++t) {
      Mask g = oracle::random_mask(d, {}, 0.02, rng);
      Mask p = oracle::random_mask(d, {}, 0.02, rng);
      // Clear a corner, then add an isolated voxel inside it.
      for (int z = 9; z < 12; ++z)
        for (int y = 9; y < 12; ++y)
          for (int x = 9; x < 12; ++x) g.at(x, y, z) = p.at(x, y, z) = 0;
      const double cleared = lesion_wise_dice(p, g);
      p.at(11, 11, 11) = 1;
      CHECK(lesion_wise_dice(p, g) <= cleared + 1e-15);
    }
  }
}

TEST_CASE("lesion-wise dice matches the exhaustive oracle") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const double density = 0.01 + 0.01 * (t % 8);
    const Mask p = oracle::random_mask({12, 12, 12}, {}, density, rng);
    const Mask g = oracle::random_mask({12, 12, 12}, {}, density, rng);
    CHECK(std::abs(lesion_wise_dice(p, g) - oracle::lesion_wise_dice(p, g)) <= 1e-12);
  }
}

TEST_CASE("case report") {
  const Dims d{10, 10, 10};
  LabelVolume gt(d, {});
  for (int x = 2; x < 5; ++x) gt.at(x, 2, 2) = 1;
  gt.at(7, 7, 7) = 4;
  SUBCASE("prediction equals reference") {
    const auto r = evaluate_case(gt, gt);
    for (const auto& c : r.regions) CHECK(c.lesion_wise_dice == 1.0);
    const auto j = to_json(r);
    std::vector<std::string> keys;
    for (auto& [k, v] : j["regions"].items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"CC", "ED", "ET", "NET", "TC", "WT"});
  }
  SUBCASE("empty prediction") {
    const auto r = evaluate_case(LabelVolume(d, {}), gt);
    CHECK(r.regions[0].lesion_wise_dice == 1.0);  // CC absent from both
    CHECK(r.regions[1].lesion_wise_dice == 0.0);  // ED
    CHECK(r.regions[2].lesion_wise_dice == 0.0);  // ET
    CHECK(r.regions[3].lesion_wise_dice == 1.0);  // NET
    CHECK(r.regions[4].lesion_wise_dice == 0.0);  // TC
    CHECK(r.regions[5].lesion_wise_dice == 0.0);  // WT
  }
  SUBCASE("hand computed two-lesion case") {
    // ET: one lesion of 3 voxels predicted with 2 of them plus one distant
    // false positive voxel. Lesion dice 2*2/(3+2) = 0.8, averaged with 0.
    LabelVolume pred(d, {});
    pred.at(2, 2, 2) = pred.at(3, 2, 2) = 1;
    pred.at(9, 0, 9) = 1;
    pred.at(7, 7, 7) = 4;
    const auto r = evaluate_case(pred, gt);
    CHECK(r.regions[2].lesion_wise_dice == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(r.regions[2].gt_lesion_count == 1);
    CHECK(r.regions[2].fp_lesion_count == 1);
    CHECK(r.regions[1].lesion_wise_dice == 1.0);
  }
}
