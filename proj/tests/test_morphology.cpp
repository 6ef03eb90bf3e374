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
#include "pedseg/distance.hpp"
#include "pedseg/morphology.hpp"

using namespace pedseg;

TEST_CASE("component labeling basics") {
  Mask m({4, 4, 4}, {});
  CHECK(connected_components(m).count == 0);
  m.at(1, 1, 1) = 1;
  auto c = connected_components(m);
  CHECK(c.count == 1);
  CHECK(c.voxel_counts[0] == 1);
  m.at(2, 2, 2) = 1;  // corner contact only
  CHECK(connected_components(m, Connectivity::TwentySix).count == 1);
  CHECK(connected_components(m, Connectivity::Six).count == 2);
}

TEST_CASE("component labeling matches flood fill on random masks") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const double density = 0.05 + 0.5 * (trial % 10) / 10.0;
    const Mask m = oracle::random_mask({8, 8, 8}, {1.0, 2.0, 0.5}, density, rng);
    for (auto conn : {Connectivity::Six, Connectivity::TwentySix}) {
      const auto got = connected_components(m, conn);
      const auto want = oracle::flood_fill(m, static_cast<int>(conn));
      REQUIRE(got.count == want.count);
      CHECK(got.ids == want.ids);  // both number components by first voxel in scan order
      std::size_t total = 0;
      for (int k = 0; k < got.count; ++k) {
        total += got.voxel_counts[k];
        CHECK(got.volumes_mm3[k] == doctest::Approx(got.voxel_counts[k] * 1.0));
      }
      CHECK(total == count_nonzero(m));
    }
  }
}

TEST_CASE("dilation") {
  Mask m({5, 5, 5}, {});
  m.at(2, 2, 2) = 1;
  CHECK(count_nonzero(dilate(m)) == 27);
  Mask corner({5, 5, 5}, {});
  corner.at(0, 0, 0) = 1;
  CHECK(count_nonzero(dilate(corner)) == 8);
  const Mask full({3, 4, 5}, {}, 1);
  CHECK(dilate(full) == full);
  CHECK(count_nonzero(dilate(m, 2)) == 125);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Mask r = oracle::random_mask({7, 6, 5}, {}, 0.08, rng);
    CHECK(dilate(r) == oracle::dilate(r));
  }
}

TEST_CASE("boundary") {
  const Mask cube({3, 3, 3}, {}, 1);
  const Mask b = boundary(cube);
  CHECK(count_nonzero(b) == 26);  // the volume edge counts as background
  CHECK(b.at(1, 1, 1) == 0);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const Mask r = oracle::random_mask({6, 7, 5}, {}, 0.5, rng);
    CHECK(boundary(r) == oracle::boundary(r));
  }
}

TEST_CASE("distance transform matches enumeration") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 30; ++t) {
    const Spacing s{0.5 + (t % 3), 1.0, 1.0 + 0.25 * (t % 5)};
    const Mask m = oracle::random_mask({7, 6, 8}, s, t % 2 ? 0.02 : 0.2, rng);
    const auto got = distance_to(m);
    const auto want = oracle::brute_distance(m);
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (std::isinf(want[i])) CHECK(std::isinf(got[i]));
      else CHECK(std::abs(got[i] - want[i]) <= 1e-9);
    }
  }
  const Mask empty({3, 3, 3}, {});
  for (double d : distance_to(empty)) CHECK(std::isinf(d));
}

TEST_CASE("small component removal") {
  const Spacing s{2, 2, 2};
  LabelVolume l({12, 12, 12}, s);
  // label 1: four voxels, 32 mm3
  for (int x = 1; x <= 4; ++x) l.at(x, 1, 1) = 1;
  // label 3: seven voxels, 56 mm3
  for (int x = 1; x <= 7; ++x) l.at(x, 8, 8) = 3;
  // label 2: a single voxel with no threshold
  l.at(10, 10, 1) = 2;
  const std::map<std::uint8_t, double> th{{1, 160.0}, {3, 50.0}};
  const auto r = remove_small_components_report(l, th);
  CHECK(r.removed.size() == 1);
  CHECK(r.removed[0].label == 1);
  CHECK(r.removed[0].voxels == 4);
  CHECK(r.removed[0].volume_mm3 == 32.0);
  for (int x = 1; x <= 4; ++x) CHECK(r.labels.at(x, 1, 1) == 0);
  for (int x = 1; x <= 7; ++x) CHECK(r.labels.at(x, 8, 8) == 3);
  CHECK(r.labels.at(10, 10, 1) == 2);
  CHECK(remove_small_components(r.labels, th) == r.labels);
}

TEST_CASE("removal groups voxels through the dilated mask") {
  // Two 3-voxel pieces one voxel apart join after dilation: 6 voxels = 48 mm3.
  LabelVolume l({10, 4, 4}, {2, 2, 2});
  for (int x : {1, 2, 3, 5, 6, 7}) l.at(x, 1, 1) = 3;
  CHECK(remove_small_components(l, {{3, 50.0}}).values() == std::vector<std::uint8_t>(l.size(), 0));
  CHECK(remove_small_components(l, {{3, 48.0}}) == l);  // strict: 48 is not below 48
  CHECK(remove_small_components(l, {{3, 30.0}}) == l);
}

TEST_CASE("removal is idempotent on random volumes") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto l = oracle::random_labels({10, 10, 10}, {1, 1.5, 2}, 0.1, {1, 2, 3, 4}, rng);
    const std::map<std::uint8_t, double> th{{1, 12.0}, {3, 6.0}};
    const auto once = remove_small_components(l, th);
    CHECK(remove_small_components(once, th) == once);
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l[i] == 2 || l[i] == 4) CHECK(once[i] == l[i]);
      else CHECK((once[i] == l[i] || once[i] == 0));
    }
  }
}
