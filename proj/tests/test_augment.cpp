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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pedseg/augment.hpp"
#include "pedseg/config.hpp"
#include "pedseg/error.hpp"

using namespace pedseg;
using namespace pedseg::augment;

namespace {

VoxelGrid noise_grid(Dims d, std::uint64_t seed, double mean = 0.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(mean, 1.0);
  VoxelGrid v(d, Spacing{});
  for (double& x : v.data()) x = g(rng);
  return v;
}

double mean_of(const VoxelGrid& v) {
  double s = 0;
  for (double x : v.data()) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const VoxelGrid& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v.data()) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// Identity-valued pair: label k sits wherever the image is k.
std::pair<VoxelGrid, LabelVolume> bar_pair(int n) {
  VoxelGrid img({n, n, n}, Spacing{});
  LabelVolume lab({n, n, n}, Spacing{});
  const int c = n / 2;
  for (int x = 1; x < n - 1; ++x) {
    img.at(x, c, c) = 1.0;
    lab.at(x, c, c) = 1;
  }
  img.at(c, c - 1, c) = 3.0;
  lab.at(c, c - 1, c) = 3;
  return {img, lab};
}

}  // namespace

TEST_CASE("flips") {
  const VoxelGrid ab({2, 1, 1}, Spacing{}, std::vector<double>{1.0, 2.0});
  FlipDraw fx;
  fx.axes = {true, false, false};
  CHECK(flip(ab, fx).values() == std::vector<double>{2.0, 1.0});

  const VoxelGrid v = noise_grid({3, 4, 5}, 1);
  CHECK(flip(v, FlipDraw{}) == v);
  FlipDraw all;
  all.axes = {true, true, true};
  CHECK(flip(flip(v, all), all) == v);
  CHECK(flip(v, all).at(0, 0, 0) == v.at(2, 3, 4));

  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const FlipDraw d = draw_flip({0.0, 0.0, 0.0}, rng);
    CHECK_FALSE((d.axes[0] || d.axes[1] || d.axes[2]));
    const FlipDraw e = draw_flip({1.0, 1.0, 1.0}, rng);
    CHECK((e.axes[0] && e.axes[1] && e.axes[2]));
  }
}

TEST_CASE("noise and blur") {
  const VoxelGrid v = noise_grid({24, 24, 24}, 3);
  Rng rng(4);
  CHECK(gaussian_noise(v, 0.0, rng) == v);
  CHECK(gaussian_blur(v, 0.0) == v);
  CHECK_THROWS_AS(gaussian_noise(v, -1.0, rng), Error);

  const VoxelGrid noisy = gaussian_noise(VoxelGrid({24, 24, 24}, Spacing{}), 0.25, rng);
  CHECK(variance_of(noisy) == doctest::Approx(0.25).epsilon(0.05));

  const VoxelGrid c({6, 5, 4}, Spacing{}, 2.5);
  const VoxelGrid bc = gaussian_blur(c, 1.3);
  for (double x : bc.data()) CHECK(x == doctest::Approx(2.5).epsilon(1e-14));

  CHECK(v.size() >= 10000);
  CHECK(variance_of(gaussian_blur(v, 1.0)) < 0.5 * variance_of(v));
}

TEST_CASE("intensity transforms") {
  const VoxelGrid v = noise_grid({5, 5, 5}, 5, 3.0);
  CHECK(brightness(v, 1.0) == v);
  CHECK(contrast(v, 1.0).values() == v.values());
  CHECK(gamma_correct(v, 1.0).data()[7] == doctest::Approx(v.data()[7]).epsilon(1e-14));
  CHECK(brightness(v, 2.0).at(1, 2, 3) == 2.0 * v.at(1, 2, 3));
  CHECK(mean_of(contrast(v, 1.7)) == doctest::Approx(mean_of(v)).epsilon(1e-14));

  const VoxelGrid g({3, 1, 1}, Spacing{}, std::vector<double>{0.0, 0.5, 1.0});
  const VoxelGrid g2 = gamma_correct(g, 2.0);
  CHECK(g2.values() == std::vector<double>{0.0, 0.25, 1.0});
  const VoxelGrid gi = gamma_correct(g, 2.0, true);
  CHECK(gi.values() == std::vector<double>{0.0, 0.75, 1.0});

  // Rescaling goes back to the original range.
  const VoxelGrid s({3, 1, 1}, Spacing{}, std::vector<double>{-2.0, 0.0, 2.0});
  CHECK(gamma_correct(s, 2.0).values() == std::vector<double>{-2.0, -1.0, 2.0});

  const VoxelGrid flat({4, 4, 4}, Spacing{}, 1.25);
  CHECK(gamma_correct(flat, 2.0) == flat);
  CHECK_THROWS_AS(gamma_correct(g, 0.0), Error);
}

TEST_CASE("low resolution") {
  const VoxelGrid v = noise_grid({7, 8, 9}, 6);
  CHECK(simulate_low_resolution(v, 1.0) == v);
  for (double f : {0.5, 0.61, 0.9}) CHECK(simulate_low_resolution(v, f).dims() == v.dims());
  VoxelGrid impulse({9, 9, 9}, Spacing{});
  impulse.at(4, 4, 4) = 1.0;
  const VoxelGrid lo = simulate_low_resolution(impulse, 0.5);
  double peak = 0;
  int nonzero = 0;
  for (double x : lo.data()) {
    peak = std::max(peak, x);
    nonzero += x > 1e-12;
  }
  CHECK(peak < 1.0);
  CHECK(nonzero > 1);
  SUBCASE("every impulse position loses peak") {
    for (int n : {6, 9}) {
      for (int p = 0; p < n; ++p) {
        VoxelGrid imp({n, n, 1}, Spacing{});
        imp.at(p, n / 2, 0) = 1.0;
        const VoxelGrid out = simulate_low_resolution(imp, 0.5);
        CAPTURE(n);
        CAPTURE(p);
        CHECK(*std::max_element(out.data().begin(), out.data().end()) < 1.0);
      }
    }
  }
  const VoxelGrid flat({7, 5, 6}, Spacing{}, -0.75);
  const VoxelGrid flat_lo = simulate_low_resolution(flat, 0.6);
  for (double x : flat_lo.data()) CHECK(x == doctest::Approx(-0.75).epsilon(1e-14));
  CHECK_THROWS_AS(simulate_low_resolution(v, 0.0), Error);
  CHECK_THROWS_AS(simulate_low_resolution(v, 1.5), Error);
}

TEST_CASE("affine") {
  const VoxelGrid v = noise_grid({6, 7, 8}, 7);
  const VoxelGrid id = affine(v, AffineDraw{});
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(id[i] - v[i]) < 1e-12);

  const auto [img, lab] = bar_pair(7);
  AffineDraw quarter;
  quarter.rz = std::numbers::pi / 2;
  const VoxelGrid r = affine(img, quarter);
  const LabelVolume rl = affine(lab, quarter);
  int along_y = 0;
  for (int y = 1; y < 6; ++y) along_y += std::abs(r.at(3, y, 3) - 1.0) < 1e-9 || std::abs(r.at(3, y, 3) - 3.0) < 1e-9;
  CHECK(along_y == 5);
  CHECK(std::abs(r.at(1, 3, 3)) < 1e-9);

  SUBCASE("labels follow the image voxel for voxel") {
    FlipDraw f;
    f.axes = {true, false, true};
    const VoxelGrid ri = flip(r, f);
    const LabelVolume rli = flip(rl, f);
    for (std::size_t i = 0; i < ri.size(); ++i) CHECK(std::lround(ri[i]) == rli[i]);
  }
  SUBCASE("only original labels appear") {
    Rng rng(8);
    std::uniform_real_distribution<double> ang(-0.6, 0.6), sc(0.7, 1.4);
    for (int t = 0; t < 10; ++t) {
      const LabelVolume out = affine(lab, AffineDraw{ang(rng), ang(rng), ang(rng), sc(rng)});
      for (auto l : out.data()) CHECK((l == 0 || l == 1 || l == 3));
    }
  }
}

TEST_CASE("pipeline draws") {
  const AugmentConfig cfg;
  cfg.validate();
  const VoxelGrid img = noise_grid({8, 8, 8}, 9);
  LabelVolume lab({8, 8, 8}, Spacing{});
  lab.at(4, 4, 4) = 2;
  Rng a(10), b(10);
  const AugmentedCase x = augment_case(img, lab, cfg, a), y = augment_case(img, lab, cfg, b);
  CHECK(x.image == y.image);
  CHECK(x.labels == y.labels);

  AugmentConfig off = cfg;
  for (bool* e : {&off.affine_enabled, &off.noise_enabled, &off.blur_enabled, &off.brightness_enabled,
                  &off.contrast_enabled, &off.lowres_enabled, &off.gamma_enabled, &off.flip_enabled})
    *e = false;
  Rng c(11);
  const AugmentDraw d = draw_augmentation(off, c);
  CHECK_FALSE(d.affine.has_value());
  CHECK_FALSE(d.gamma.has_value());
  const AugmentedCase z = apply(img, lab, d);
  CHECK(z.image == img);
  CHECK(z.labels == lab);
}

TEST_CASE("augment config") {
  const auto kv = KeyValueConfig::parse("augment.gamma = [0.8, 1.2]\naugment.flip_x_probability = 0\n");
  const AugmentConfig c = AugmentConfig::from(kv);
  CHECK(c.gamma == Range{0.8, 1.2});
  CHECK(c.flip_probability[0] == 0.0);
  CHECK(c.to_json().at("gamma").at("gamma")[1] == 1.2);

  try {
    AugmentConfig::from(KeyValueConfig::parse("augment.scale = [1.4, 0.7]\n"));
    FAIL("expected DegenerateRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateRange);
  }
  CHECK_THROWS_AS(AugmentConfig::from(KeyValueConfig::parse("augment.elastic_enabled = true\n")), Error);
  CHECK_THROWS_AS(AugmentConfig::from(KeyValueConfig::parse("augment.noise_probability = 1.5\n")), Error);
}
