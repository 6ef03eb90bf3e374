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

#include <cmath>
#include <random>

#include "pedseg/volume.hpp"

using namespace pedseg;

namespace {

double mean_over(const VoxelGrid& g, const std::vector<std::size_t>& idx) {
  double s = 0;
  for (auto i : idx) s += g[i];
  return s / static_cast<double>(idx.size());
}

double std_over(const VoxelGrid& g, const std::vector<std::size_t>& idx) {
  const double m = mean_over(g, idx);
  double s = 0;
  for (auto i : idx) s += (g[i] - m) * (g[i] - m);
  return std::sqrt(s / static_cast<double>(idx.size()));
}

}  // namespace

TEST_CASE("construction validates geometry and values") {
  CHECK_THROWS_AS(VoxelGrid({0, 1, 1}, {}), Error);
  CHECK_THROWS_AS(VoxelGrid({1, 1, 1}, {1.0, 0.0, 1.0}), Error);
  CHECK_THROWS_AS(VoxelGrid({2, 1, 1}, {}, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(VoxelGrid({1, 1, 1}, {}, std::vector<double>{NAN}), Error);
  try {
    LabelVolume({1, 1, 1}, {}, std::vector<std::uint8_t>{5});
    FAIL("label 5 accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidLabel);
  }
  CHECK(Spacing{2, 3, 4}.voxel_volume() == 24.0);
}

TEST_CASE("layout is x fastest") {
  VoxelGrid g({3, 4, 5}, {});
  CHECK(g.index(1, 0, 0) == 1);
  CHECK(g.index(0, 1, 0) == 3);
  CHECK(g.index(0, 0, 1) == 12);
  CHECK(g.index(2, 3, 4) == 59);
}

TEST_CASE("zscore normalization") {
  SUBCASE("two voxels, whole volume") {
    const VoxelGrid g({2, 1, 1}, {}, std::vector<double>{2.0, 4.0});
    const auto n = zscore_normalize(g, NormalizeRegion::WholeVolume);
    CHECK(n[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(n[1] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("constant grid maps to zeros") {
    const VoxelGrid g({3, 3, 3}, {}, 5.0);
    for (auto mode : {NormalizeRegion::WholeVolume, NormalizeRegion::Foreground}) {
      const auto n = zscore_normalize(g, mode);
      for (double v : n.data()) CHECK(v == 0.0);
    }
  }
  SUBCASE("foreground statistics and idempotence") {
    VoxelGrid g({6, 5, 4}, {1.0, 2.0, 3.0});
    std::vector<std::size_t> fg;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (i % 3) {
        g[i] = static_cast<double>(i);
        fg.push_back(i);
      }
    const auto n = zscore_normalize(g);
    CHECK(std::abs(mean_over(n, fg)) < 1e-12);
    CHECK(std_over(n, fg) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < g.size(); i += 3) CHECK(n[i] == 0.0);
    CHECK(n.spacing() == g.spacing());
    const auto twice = zscore_normalize(n);
    for (std::size_t i = 0; i < n.size(); ++i) CHECK(std::abs(twice[i] - n[i]) <= 1e-6);
  }
}

TEST_CASE("trilinear resampling") {
  SUBCASE("hand weights") {
    const VoxelGrid g({2, 1, 1}, {}, std::vector<double>{0.0, 1.0});
    const auto r = trilinear_resample(g, {3, 1, 1});
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.5);
    CHECK(r[2] == 1.0);
  }
  SUBCASE("identity dims are bit identical") {
    std::mt19937_64 rng(1);
    VoxelGrid g({5, 4, 3}, {0.5, 1.0, 2.0});
    for (auto& v : g.data()) v = std::normal_distribution<double>(0, 3)(rng);
    CHECK(trilinear_resample(g, g.dims()) == g);
  }
  SUBCASE("constant stays constant, spacing keeps the field of view") {
    const VoxelGrid g({4, 4, 4}, {1.0, 1.0, 1.0}, 2.5);
    const auto r = trilinear_resample(g, {7, 2, 3});
    for (double v : r.data()) CHECK(v == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(r.spacing().dx == doctest::Approx(4.0 / 7.0));
    CHECK(r.spacing().dy == doctest::Approx(2.0));
  }
  SUBCASE("values stay within the input range") {
    std::mt19937_64 rng(9);
    VoxelGrid g({5, 6, 4}, {});
    for (auto& v : g.data()) v = std::uniform_real_distribution<double>(-2, 7)(rng);
    const auto [lo, hi] = std::minmax_element(g.data().begin(), g.data().end());
    for (Dims t : {Dims{9, 3, 8}, Dims{2, 11, 1}, Dims{1, 1, 1}}) {
      const auto r = trilinear_resample(g, t);
      for (double v : r.data()) {
        CHECK(v >= *lo);
        CHECK(v <= *hi);
      }
    }
  }
}

TEST_CASE("composite regions") {
  LabelVolume l({5, 1, 1}, {}, std::vector<std::uint8_t>{0, 1, 2, 3, 4});
  const auto r = composite_regions(l);
  CHECK(std::vector<std::uint8_t>(r.tumor_core.values()) == std::vector<std::uint8_t>{0, 1, 1, 1, 0});
  CHECK(std::vector<std::uint8_t>(r.whole_tumor.values()) == std::vector<std::uint8_t>{0, 1, 1, 1, 1});

  const LabelVolume ed({3, 1, 1}, {}, std::vector<std::uint8_t>{0, 4, 0});
  const auto e = composite_regions(ed);
  CHECK(count_nonzero(e.tumor_core) == 0);
  CHECK(count_nonzero(e.whole_tumor) == 1);

  std::mt19937_64 rng(4);
  LabelVolume rnd({8, 8, 8}, {});
  for (auto& v : rnd.data()) v = static_cast<std::uint8_t>(rng() % 5);
  const auto rr = composite_regions(rnd);
  for (std::size_t i = 0; i < rnd.size(); ++i) CHECK((!rr.tumor_core[i] || rr.whole_tumor[i]));
}
