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

#include "pedseg/error.hpp"
#include "pedseg/init.hpp"
#include "pedseg/layers.hpp"

using namespace pedseg;
using namespace pedseg::nn;

namespace {

Tensor5 random_tensor(Shape5 s, Rng& rng, double mean = 0.0) {
  std::normal_distribution<double> g(mean, 1.0);
  Tensor5 t(s);
  for (auto& v : t.value()) v = g(rng);
  return t;
}

double lrelu(double v) { return v > 0 ? v : kLeakySlope * v; }

}  // namespace

TEST_CASE("instance norm") {
  SUBCASE("constant channel gives the shift") {
    const Tensor5 x({1, 2, 2, 2, 2}, 3.0);
    const std::vector<double> scale{2.0, 1.0}, shift{0.5, -1.0};
    const Tensor5 y = instance_norm(x, scale, shift);
    for (int i = 0; i < 8; ++i) CHECK(y.value()[i] == 0.5);
    for (int i = 8; i < 16; ++i) CHECK(y.value()[i] == -1.0);
  }
  SUBCASE("plus and minus one") {
    const Tensor5 x({1, 1, 1, 1, 2}, std::vector<double>{-1.0, 1.0});
    const std::vector<double> one{1.0}, zero{0.0};
    const Tensor5 y = instance_norm(x, one, zero);
    CHECK(y.value()[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + kNormEps)).epsilon(1e-15));
    CHECK(y.value()[1] == doctest::Approx(1.0 / std::sqrt(1.0 + kNormEps)).epsilon(1e-15));
  }
  SUBCASE("per sample and channel statistics") {
    Rng rng(1);
    const Tensor5 x = random_tensor({3, 2, 3, 4, 5}, rng, 4.0);
    const std::vector<double> one(2, 1.0), zero(2, 0.0);
    const Tensor5 y = instance_norm(x, one, zero);
    for (int n = 0; n < 3; ++n)
      for (int c = 0; c < 2; ++c) {
        double m = 0, v = 0;
        for (double e : y.plane(n, c)) m += e;
        m /= 60;
        for (double e : y.plane(n, c)) v += (e - m) * (e - m);
        CHECK(std::abs(m) < 1e-12);
        CHECK(v / 60 == doctest::Approx(1.0).epsilon(1e-3));
      }
  }
}

TEST_CASE("leaky relu") {
  const Tensor5 x({1, 1, 1, 1, 4}, std::vector<double>{-2.0, -0.0, 0.5, 3.0});
  ActContext ctx;
  const Tensor5 y = leaky_relu(x, kLeakySlope, &ctx);
  CHECK(y.value()[0] == -0.02);
  CHECK(y.value()[2] == 0.5);
  const Tensor5 g = leaky_relu_backward(Tensor5({1, 1, 1, 1, 4}, 1.0), ctx);
  CHECK(g.value()[0] == kLeakySlope);
  CHECK(g.value()[3] == 1.0);
}

TEST_CASE("squeeze excitation") {
  SUBCASE("zero weights gate at one half") {
    Rng rng(2);
    const Tensor5 x = random_tensor({2, 20, 2, 2, 3}, rng);
    const SeWeights w = SeWeights::zeros(20);
    CHECK(w.hidden == 1);
    const Tensor5 y = se_attention(x, w);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.value()[i] == x.value()[i] / 2);
  }
  SUBCASE("single channel by hand") {
    const Tensor5 x({1, 1, 1, 2, 2}, std::vector<double>{1.0, 2.0, 3.0, 6.0});
    SeWeights w = SeWeights::zeros(1);
    w.w1 = {0.5};
    w.b1 = {-0.25};
    w.w2 = {-1.5};
    w.b2 = {0.75};
    const double mean = 3.0;
    const double hidden = std::max(0.0, 0.5 * mean - 0.25);
    const double gate = 1.0 / (1.0 + std::exp(-(-1.5 * hidden + 0.75)));
    const Tensor5 y = se_attention(x, w);
    for (int i = 0; i < 4; ++i) CHECK(y.value()[i] == doctest::Approx(gate * x.value()[i]).epsilon(1e-15));
  }
  SUBCASE("hidden width and counts") {
    CHECK(SeWeights::hidden_width(32) == 2);
    CHECK(SeWeights::hidden_width(15) == 1);
    CHECK(SeWeights::hidden_width(640) == 40);
    const SeWeights w = SeWeights::zeros(64);
    CHECK(w.parameter_count(false) == 2 * 64 * 4);
    CHECK(w.parameter_count(true) == 2 * 64 * 4 + 4 + 64);
  }
}

TEST_CASE("drop path") {
  Rng rng(3);
  const Tensor5 x = random_tensor({4, 2, 2, 2, 2}, rng);
  for (Mode m : {Mode::Train, Mode::Infer}) {
    const Tensor5 y = drop_path(x, 0.0, m, rng);
    CHECK(std::equal(y.value().begin(), y.value().end(), x.value().begin()));
  }
  const Tensor5 yi = drop_path(x, 0.7, Mode::Infer, rng);
  CHECK(std::equal(yi.value().begin(), yi.value().end(), x.value().begin()));
  CHECK_THROWS_AS(drop_path(x, 1.0, Mode::Train, rng), Error);

  SUBCASE("whole samples are kept or dropped") {
    DropPathContext ctx;
    const Tensor5 y = drop_path(x, 0.5, Mode::Train, rng, &ctx);
    for (int n = 0; n < 4; ++n) {
      const double s = ctx.sample_scale[static_cast<std::size_t>(n)];
      CHECK((s == 0.0 || s == 2.0));
      for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 8; ++i) CHECK(y.plane(n, c)[i] == s * x.plane(n, c)[i]);
    }
  }
  SUBCASE("unbiased in expectation") {
    const double p = 0.05;
    const int samples = 200000;
    const Tensor5 ones({samples, 1, 1, 1, 1}, 1.0);
    const Tensor5 y = drop_path(ones, p, Mode::Train, rng);
    double m = 0;
    for (double v : y.value()) m += v;
    m /= samples;
    const double sd = std::sqrt(p / (1 - p) / samples);
    CHECK(std::abs(m - 1.0) < 3 * sd);
  }
}

TEST_CASE("residual SE block reduces to the activation when the branch is silent") {
  Rng rng(4);
  ResidualSEBlock block("b", 4);
  gaussian_init(block.params(), 1.0, rng);
  std::fill(block.conv1.weight.value.begin(), block.conv1.weight.value.end(), 0.0);
  std::fill(block.conv2.weight.value.begin(), block.conv2.weight.value.end(), 0.0);
  std::fill(block.se.w2.value.begin(), block.se.w2.value.end(), 0.0);
  std::fill(block.se.b2.value.begin(), block.se.b2.value.end(), 0.0);
  const Tensor5 x = random_tensor({2, 4, 3, 3, 3}, rng);
  for (Mode m : {Mode::Infer, Mode::Train}) {
    const Tensor5 y = block.forward(x, m, rng);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.value()[i] == lrelu(x.value()[i]));
  }
  Tensor5 pos = x;
  for (auto& v : pos.value()) v = std::abs(v);
  const Tensor5 y = block.forward(pos, Mode::Infer, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.value()[i] == pos.value()[i]);
}

TEST_CASE("separable block keeps channel-constant inputs constant") {
  Rng rng(5);
  DepthwiseSeparableBlock block("s", 3, 2);
  gaussian_init(block.params(), 1.0, rng);
  // Averaging depthwise kernels; padding makes borders differ, so check the
  // depthwise stage on the interior and the full block on a 1x1x1 volume.
  std::fill(block.depthwise.weight.value.begin(), block.depthwise.weight.value.end(), 1.0 / 27.0);
  Tensor5 x({1, 3, 1, 1, 1});
  x.value()[0] = 1.0;
  x.value()[1] = -2.0;
  x.value()[2] = 0.5;
  const Tensor5 y = block.forward(x);
  CHECK(y.shape() == Shape5{1, 2, 1, 1, 1});
  Tensor5 big({1, 3, 5, 5, 5});
  for (int c = 0; c < 3; ++c)
    for (double& v : big.plane(0, c)) v = x.value()[static_cast<std::size_t>(c)];
  const Tensor5 yb = block.forward(big);
  for (int c = 0; c < 2; ++c) {
    const auto pl = yb.plane(0, c);
    for (double v : pl) CHECK(std::isfinite(v));
  }
  const Tensor5 d = conv3d_forward(big, block.depthwise.spec(), block.depthwise.weight.value, {});
  for (int c = 0; c < 3; ++c) CHECK(d.at(0, c, 2, 2, 2) == doctest::Approx(x.value()[static_cast<std::size_t>(c)]).epsilon(1e-14));
}

TEST_CASE("channel concat and split") {
  Rng rng(6);
  const Tensor5 a = random_tensor({2, 2, 2, 1, 3}, rng), b = random_tensor({2, 3, 2, 1, 3}, rng);
  const Tensor5 c = concat_channels(a, b);
  CHECK(c.shape().c == 5);
  const auto [ga, gb] = split_channels(c, 2);
  CHECK(std::equal(ga.value().begin(), ga.value().end(), a.value().begin()));
  CHECK(std::equal(gb.value().begin(), gb.value().end(), b.value().begin()));
  CHECK(c.at(1, 3, 1, 0, 2) == b.at(1, 1, 1, 0, 2));
}

TEST_CASE("module parameter counts") {
  ResidualSEBlock block("b", 32);
  // two bias-free 3x3x3 convs, two norms, SE with biases (hidden 2)
  CHECK(parameter_count(block.params()) == 2 * 27 * 32 * 32 + 2 * 64 + (2 * 32 * 2 + 2 + 32));
  DepthwiseSeparableBlock sep("s", 32, 32);
  CHECK(parameter_count(sep.params()) == 27 * 32 + 32 * 32 + 2 * 64);
}
