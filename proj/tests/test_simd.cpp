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
#include <vector>

#include "pedseg/conv.hpp"
#include "pedseg/simd/kernels.hpp"

using namespace pedseg::simd;

namespace {

std::vector<Level> vector_levels() {
  std::vector<Level> out;
  for (Level l : {Level::Avx2, Level::Neon})
    if (supported(l)) out.push_back(l);
  return out;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Sums reassociate across lanes, so only agreement to rounding is expected.
bool close(double a, double b, double scale) { return std::abs(a - b) <= 1e-12 * std::max(1.0, scale); }

}  // namespace

TEST_CASE("scalar level is always available and names are stable") {
  CHECK(supported(Level::Scalar));
  CHECK(level_name(Level::Scalar) == "scalar");
  CHECK(level_name(Level::Avx2) == "avx2");
  CHECK(supported(best_level()));
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const KernelTable& ref = table(Level::Scalar);
  std::mt19937_64 rng(7);
  for (Level level : vector_levels()) {
    const KernelTable& vec = table(level);
    CAPTURE(level_name(level));
    // Lengths around every lane boundary, including the empty tail.
    for (std::size_t n : {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 101, 1000}) {
      CAPTURE(n);
      const auto x = random_vec(n, rng), y = random_vec(n, rng);
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::abs(x[i] * y[i]) + std::abs(x[i]);

      CHECK(close(ref.dot(x.data(), y.data(), n), vec.dot(x.data(), y.data(), n), scale));
      CHECK(close(ref.sum(x.data(), n), vec.sum(x.data(), n), scale));
      CHECK(close(ref.sum_sq_dev(x.data(), n, 0.3), vec.sum_sq_dev(x.data(), n, 0.3), scale * scale + n));

      auto ya = y, yb = y;
      ref.axpy(-1.7, x.data(), ya.data(), n);
      vec.axpy(-1.7, x.data(), yb.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ya[i] - yb[i]) <= 1e-15 * (1 + std::abs(ya[i])));

      std::vector<double> sa(n), sb(n);
      ref.scale_shift(x.data(), sa.data(), n, 2.5, -0.25);
      vec.scale_shift(x.data(), sb.data(), n, 2.5, -0.25);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(sa[i] - sb[i]) <= 1e-15 * (1 + std::abs(sa[i])));

      // Denominators straddling the guard, including exact hits.
      auto den = random_vec(n, rng);
      for (std::size_t i = 0; i < n; i += 3) den[i] = (i % 2 ? 1e-6 : -5e-7);
      std::vector<double> qa(n), qb(n);
      std::vector<std::uint8_t> ea(n), eb(n);
      ref.guarded_div(x.data(), den.data(), qa.data(), ea.data(), n, 1e-6);
      vec.guarded_div(x.data(), den.data(), qb.data(), eb.data(), n, 1e-6);
      CHECK(qa == qb);
      CHECK(ea == eb);

      std::vector<std::uint8_t> bx(n), by(n);
      std::uniform_int_distribution<int> bit(0, 1);
      for (std::size_t i = 0; i < n; ++i) {
        bx[i] = static_cast<std::uint8_t>(bit(rng));
        by[i] = static_cast<std::uint8_t>(bit(rng));
      }
      auto oa = by, ob = by;
      ref.or_bytes(bx.data(), oa.data(), n);
      vec.or_bytes(bx.data(), ob.data(), n);
      CHECK(oa == ob);
    }
  }
}

TEST_CASE("guarded division marks the band and zeroes it") {
  const double num[4] = {1.0, 2.0, 3.0, 4.0};
  const double den[4] = {2.0, 5e-7, -1e-6, -2.0};
  double out[4];
  std::uint8_t ex[4];
  table(Level::Scalar).guarded_div(num, den, out, ex, 4, 1e-6);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 0.0);
  CHECK(ex[1] == 1);
  CHECK(ex[2] == 0);  // |den| >= guard divides
  CHECK(out[2] == -3e6);
  CHECK(out[3] == -2.0);
}

TEST_CASE("convolution gives the same result at every level") {
  using namespace pedseg::nn;
  std::mt19937_64 rng(3);
  const auto spec = ConvSpec::standard(3, 2, 3);
  Tensor5 x({1, 2, 5, 6, 17});
  for (auto& v : x.value()) v = std::normal_distribution<double>(0, 1)(rng);
  const auto w = random_vec(spec.weight_count(), rng);
  const Level saved = active_level();
  set_level(Level::Scalar);
  const Tensor5 ref = conv3d_forward(x, spec, w, {});
  for (Level level : vector_levels()) {
    set_level(level);
    const Tensor5 got = conv3d_forward(x, spec, w, {});
    for (std::size_t i = 0; i < ref.numel(); ++i) CHECK(std::abs(ref.value()[i] - got.value()[i]) <= 1e-12);
  }
  set_level(saved);
}
