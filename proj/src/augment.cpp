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

#include "pedseg/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "pedseg/config.hpp"
#include "pedseg/simd/kernels.hpp"

namespace pedseg::augment {

namespace {

template <class V>
V flip_impl(const V& in, const FlipDraw& draw) {
  const Dims d = in.dims();
  V out = in;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const int sx = draw.axes[0] ? d.nx - 1 - x : x;
        const int sy = draw.axes[1] ? d.ny - 1 - y : y;
        const int sz = draw.axes[2] ? d.nz - 1 - z : z;
        out.at(x, y, z) = in.at(sx, sy, sz);
      }
  return out;
}

// Corner-aligned linear shrink of one axis. The tent widens with the step so
// every input voxel contributes (antialiased trilinear).
VoxelGrid shrink_axis(const VoxelGrid& in, int axis, int n_out) {
  const Dims d = in.dims();
  const std::array<int, 3> n{d.nx, d.ny, d.nz};
  const int n_in = n[static_cast<std::size_t>(axis)];
  if (n_out == n_in) return in;
  const double step = n_out == 1 ? static_cast<double>(n_in) : static_cast<double>(n_in - 1) / (n_out - 1);
  const double width = std::max(1.0, step);

  std::vector<std::vector<std::pair<int, double>>> taps(static_cast<std::size_t>(n_out));
  for (int i = 0; i < n_out; ++i) {
    const double src = n_out == 1 ? 0.5 * (n_in - 1) : i * step;
    double total = 0.0;
    auto& t = taps[static_cast<std::size_t>(i)];
    const int j0 = std::max(0, static_cast<int>(std::floor(src - width)));
    const int j1 = std::min(n_in - 1, static_cast<int>(std::ceil(src + width)));
    for (int j = j0; j <= j1; ++j) {
      const double w = 1.0 - std::abs(j - src) / width;
      if (w > 0.0) {
        t.emplace_back(j, w);
        total += w;
      }
    }
    for (auto& [j, w] : t) w /= total;
  }

  Dims od = d;
  (axis == 0 ? od.nx : axis == 1 ? od.ny : od.nz) = n_out;
  VoxelGrid out(od, in.spacing(), 0.0);
  for (int z = 0; z < od.nz; ++z)
    for (int y = 0; y < od.ny; ++y)
      for (int x = 0; x < od.nx; ++x) {
        const int i = axis == 0 ? x : axis == 1 ? y : z;
        double v = 0.0;
        for (const auto& [j, w] : taps[static_cast<std::size_t>(i)]) {
          v += w * (axis == 0 ? in.at(j, y, z) : axis == 1 ? in.at(x, j, z) : in.at(x, y, j));
        }
        out.at(x, y, z) = v;
      }
  return out;
}

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) fail(Errc::ConfigError, std::string(what) + " probability must lie in [0, 1]");
}

void check_range(const Range& r, const char* what) {
  if (!std::isfinite(r.first) || !std::isfinite(r.second)) fail(Errc::ConfigError, std::string(what) + " range must be finite");
  if (r.first > r.second) fail(Errc::DegenerateRange, std::string(what) + " range has low > high");
}

double draw(const Range& r, Rng& rng) {
  if (r.first == r.second) return r.first;
  return std::uniform_real_distribution<double>(r.first, r.second)(rng);
}

bool coin(double p, Rng& rng) { return std::bernoulli_distribution(p)(rng); }

// Snaps coordinates that are integral up to rounding so exact grid maps
// (identity, quarter turns) stay exact.
double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

// Maps an output index to the source index for the draw: p_src = R^T p / s.
struct AffineMap {
  std::array<double, 9> inv;  // rows of R^T / s, acting on physical offsets
  std::array<double, 3> centre;
  Spacing sp;

  AffineMap(const AffineDraw& d, const Dims& dims, const Spacing& spacing) : sp(spacing) {
    if (!(d.scale > 0.0) || !std::isfinite(d.scale)) fail(Errc::InvalidArgument, "affine scale must be positive");
    const double cx = std::cos(d.rx), sx = std::sin(d.rx);
    const double cy = std::cos(d.ry), sy = std::sin(d.ry);
    const double cz = std::cos(d.rz), sz = std::sin(d.rz);
    // R = Rz * Ry * Rx
    const std::array<double, 9> r{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
                                  sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
                                  -sy,     cy * sx,                cy * cx};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) inv[static_cast<std::size_t>(3 * i + j)] = r[static_cast<std::size_t>(3 * j + i)] / d.scale;
    centre = {0.5 * (dims.nx - 1), 0.5 * (dims.ny - 1), 0.5 * (dims.nz - 1)};
  }

  std::array<double, 3> source(int x, int y, int z) const {
    const std::array<double, 3> p{(x - centre[0]) * sp.dx, (y - centre[1]) * sp.dy, (z - centre[2]) * sp.dz};
    const std::array<double, 3> q{inv[0] * p[0] + inv[1] * p[1] + inv[2] * p[2],
                                  inv[3] * p[0] + inv[4] * p[1] + inv[5] * p[2],
                                  inv[6] * p[0] + inv[7] * p[1] + inv[8] * p[2]};
    return {snap(q[0] / sp.dx + centre[0]), snap(q[1] / sp.dy + centre[1]), snap(q[2] / sp.dz + centre[2])};
  }
};

bool inside(const std::array<double, 3>& s, const Dims& d) {
  return s[0] >= 0 && s[1] >= 0 && s[2] >= 0 && s[0] <= d.nx - 1 && s[1] <= d.ny - 1 && s[2] <= d.nz - 1;
}

}  // namespace

FlipDraw draw_flip(const std::array<double, 3>& probabilities, Rng& rng) {
  FlipDraw d;
  for (std::size_t a = 0; a < 3; ++a) {
    check_probability(probabilities[a], "flip");
    d.axes[a] = coin(probabilities[a], rng);
  }
  return d;
}

VoxelGrid flip(const VoxelGrid& grid, const FlipDraw& draw) { return flip_impl(grid, draw); }
LabelVolume flip(const LabelVolume& labels, const FlipDraw& draw) { return flip_impl(labels, draw); }

VoxelGrid gaussian_noise(const VoxelGrid& grid, double variance, Rng& rng) {
  if (!(variance >= 0.0)) fail(Errc::InvalidArgument, "noise variance must be nonnegative");
  if (variance == 0.0) return grid;
  std::normal_distribution<double> n(0.0, std::sqrt(variance));
  std::vector<double> v = grid.values();
  for (auto& x : v) x += n(rng);
  return VoxelGrid(grid.dims(), grid.spacing(), std::move(v));
}

VoxelGrid gaussian_blur(const VoxelGrid& grid, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail(Errc::InvalidArgument, "blur sigma must be nonnegative");
  if (sigma == 0.0) return grid;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  const double total = simd::sum(k);
  for (auto& w : k) w /= total;

  const Dims d = grid.dims();
  std::vector<double> cur = grid.values(), next(cur.size());
  const std::array<int, 3> n{d.nx, d.ny, d.nz};
  const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(d.nx),
                                          static_cast<std::size_t>(d.nx) * static_cast<std::size_t>(d.ny)};
  for (std::size_t axis = 0; axis < 3; ++axis) {
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const int pos = static_cast<int>((i / stride[axis]) % static_cast<std::size_t>(n[axis]));
      const std::size_t base = i - static_cast<std::size_t>(pos) * stride[axis];
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        const int q = std::clamp(pos + t, 0, n[axis] - 1);
        acc += k[static_cast<std::size_t>(t + radius)] * cur[base + static_cast<std::size_t>(q) * stride[axis]];
      }
      next[i] = acc;
    }
    std::swap(cur, next);
  }
  return VoxelGrid(d, grid.spacing(), std::move(cur));
}

VoxelGrid brightness(const VoxelGrid& grid, double multiplier) {
  if (!std::isfinite(multiplier)) fail(Errc::InvalidArgument, "brightness multiplier must be finite");
  std::vector<double> v(grid.size());
  simd::scale_shift(grid.data(), v, multiplier, 0.0);
  return VoxelGrid(grid.dims(), grid.spacing(), std::move(v));
}

VoxelGrid contrast(const VoxelGrid& grid, double factor) {
  if (!std::isfinite(factor)) fail(Errc::InvalidArgument, "contrast factor must be finite");
  if (factor == 1.0) return grid;
  const double mean = simd::sum(grid.data()) / static_cast<double>(grid.size());
  std::vector<double> v(grid.size());
  simd::scale_shift(grid.data(), v, factor, mean * (1.0 - factor));
  return VoxelGrid(grid.dims(), grid.spacing(), std::move(v));
}

VoxelGrid gamma_correct(const VoxelGrid& grid, double gamma, bool inverted) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail(Errc::InvalidArgument, "gamma must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(grid.values().begin(), grid.values().end());
  const double lo = *lo_it, hi = *hi_it;
  if (gamma == 1.0 || hi == lo) return grid;
  const double span = hi - lo;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = (grid[i] - lo) / span;
    const double t = inverted ? 1.0 - std::pow(1.0 - u, gamma) : std::pow(u, gamma);
    v[i] = lo + t * span;
  }
  return VoxelGrid(grid.dims(), grid.spacing(), std::move(v));
}

VoxelGrid simulate_low_resolution(const VoxelGrid& grid, double factor) {
  if (!(factor > 0.0 && factor <= 1.0)) fail(Errc::InvalidArgument, "low-resolution factor must lie in (0, 1]");
  const Dims d = grid.dims();
  auto shrink = [&](int n) { return std::max(1, static_cast<int>(std::lround(n * factor))); };
  const Dims low{shrink(d.nx), shrink(d.ny), shrink(d.nz)};
  if (low == d) return grid;
  const VoxelGrid small = shrink_axis(shrink_axis(shrink_axis(grid, 0, low.nx), 1, low.ny), 2, low.nz);
  return trilinear_resample(small, d);
}

VoxelGrid affine(const VoxelGrid& grid, const AffineDraw& draw) {
  const Dims d = grid.dims();
  const AffineMap map(draw, d, grid.spacing());
  std::vector<double> v(grid.size(), 0.0);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto s = map.source(x, y, z);
        if (inside(s, d)) v[grid.index(x, y, z)] = sample_trilinear(grid, s[0], s[1], s[2]);
      }
  return VoxelGrid(d, grid.spacing(), std::move(v));
}

LabelVolume affine(const LabelVolume& labels, const AffineDraw& draw) {
  const Dims d = labels.dims();
  const AffineMap map(draw, d, labels.spacing());
  LabelVolume out(d, labels.spacing(), std::uint8_t{0});
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto s = map.source(x, y, z);
        const int sx = static_cast<int>(std::lround(s[0]));
        const int sy = static_cast<int>(std::lround(s[1]));
        const int sz = static_cast<int>(std::lround(s[2]));
        if (labels.contains(sx, sy, sz)) out.at(x, y, z) = labels.at(sx, sy, sz);
      }
  return out;
}

void AugmentConfig::validate() const {
  for (double p : {affine_probability, noise_probability, blur_probability, brightness_probability,
                   contrast_probability, lowres_probability, gamma_probability, inverted_gamma_probability}) {
    check_probability(p, "augmentation");
  }
  for (double p : flip_probability) check_probability(p, "flip");
  check_range(rotation_deg, "rotation");
  check_range(scale, "scale");
  check_range(noise_variance, "noise variance");
  check_range(blur_sigma, "blur sigma");
  check_range(brightness, "brightness");
  check_range(contrast, "contrast");
  check_range(lowres_factor, "low-resolution factor");
  check_range(gamma, "gamma");
  if (!(scale.first > 0.0)) fail(Errc::ConfigError, "scale range must be positive");
  if (!(noise_variance.first >= 0.0)) fail(Errc::ConfigError, "noise variance must be nonnegative");
  if (!(blur_sigma.first >= 0.0)) fail(Errc::ConfigError, "blur sigma must be nonnegative");
  if (!(lowres_factor.first > 0.0 && lowres_factor.second <= 1.0)) fail(Errc::ConfigError, "low-resolution factor must lie in (0, 1]");
  if (!(gamma.first > 0.0)) fail(Errc::ConfigError, "gamma range must be positive");
  if (elastic_enabled) fail(Errc::ConfigError, "elastic deformation is not implemented");
}

AugmentConfig AugmentConfig::from(const KeyValueConfig& cfg) {
  AugmentConfig c;
  auto section = [&](const char* name, bool& enabled, double& prob) {
    const std::string k = std::string("augment.") + name;
    enabled = cfg.get_bool(k + "_enabled", enabled);
    prob = cfg.get_double(k + "_probability", prob);
  };
  section("affine", c.affine_enabled, c.affine_probability);
  section("noise", c.noise_enabled, c.noise_probability);
  section("blur", c.blur_enabled, c.blur_probability);
  section("brightness", c.brightness_enabled, c.brightness_probability);
  section("contrast", c.contrast_enabled, c.contrast_probability);
  section("lowres", c.lowres_enabled, c.lowres_probability);
  section("gamma", c.gamma_enabled, c.gamma_probability);
  c.inverted_gamma_probability = cfg.get_double("augment.inverted_gamma_probability", c.inverted_gamma_probability);
  c.rotation_deg = cfg.get_range("augment.rotation_deg", c.rotation_deg);
  c.scale = cfg.get_range("augment.scale", c.scale);
  c.noise_variance = cfg.get_range("augment.noise_variance", c.noise_variance);
  c.blur_sigma = cfg.get_range("augment.blur_sigma", c.blur_sigma);
  c.brightness = cfg.get_range("augment.brightness", c.brightness);
  c.contrast = cfg.get_range("augment.contrast", c.contrast);
  c.lowres_factor = cfg.get_range("augment.lowres_factor", c.lowres_factor);
  c.gamma = cfg.get_range("augment.gamma", c.gamma);
  c.flip_enabled = cfg.get_bool("augment.flip_enabled", c.flip_enabled);
  c.flip_probability[0] = cfg.get_double("augment.flip_x_probability", c.flip_probability[0]);
  c.flip_probability[1] = cfg.get_double("augment.flip_y_probability", c.flip_probability[1]);
  c.flip_probability[2] = cfg.get_double("augment.flip_z_probability", c.flip_probability[2]);
  c.elastic_enabled = cfg.get_bool("augment.elastic_enabled", c.elastic_enabled);
  c.validate();
  return c;
}

nlohmann::json AugmentConfig::to_json() const {
  auto range = [](const Range& r) { return nlohmann::json::array({r.first, r.second}); };
  return {{"affine", {{"enabled", affine_enabled}, {"probability", affine_probability},
                      {"rotation_deg", range(rotation_deg)}, {"scale", range(scale)}}},
          {"noise", {{"enabled", noise_enabled}, {"probability", noise_probability}, {"variance", range(noise_variance)}}},
          {"blur", {{"enabled", blur_enabled}, {"probability", blur_probability}, {"sigma", range(blur_sigma)}}},
          {"brightness", {{"enabled", brightness_enabled}, {"probability", brightness_probability},
                          {"multiplier", range(brightness)}}},
          {"contrast", {{"enabled", contrast_enabled}, {"probability", contrast_probability}, {"factor", range(contrast)}}},
          {"lowres", {{"enabled", lowres_enabled}, {"probability", lowres_probability}, {"factor", range(lowres_factor)}}},
          {"gamma", {{"enabled", gamma_enabled}, {"probability", gamma_probability},
                     {"inverted_probability", inverted_gamma_probability}, {"gamma", range(gamma)}}},
          {"flip", {{"enabled", flip_enabled}, {"probability", flip_probability}}},
          {"elastic", {{"enabled", elastic_enabled}}}};
}

AugmentDraw draw_augmentation(const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  AugmentDraw d;
  const double deg = std::numbers::pi / 180.0;
  if (cfg.affine_enabled && coin(cfg.affine_probability, rng)) {
    d.affine = AffineDraw{draw(cfg.rotation_deg, rng) * deg, draw(cfg.rotation_deg, rng) * deg,
                          draw(cfg.rotation_deg, rng) * deg, draw(cfg.scale, rng)};
  }
  if (cfg.noise_enabled && coin(cfg.noise_probability, rng)) d.noise_variance = draw(cfg.noise_variance, rng);
  if (cfg.blur_enabled && coin(cfg.blur_probability, rng)) d.blur_sigma = draw(cfg.blur_sigma, rng);
  if (cfg.brightness_enabled && coin(cfg.brightness_probability, rng)) d.brightness = draw(cfg.brightness, rng);
  if (cfg.contrast_enabled && coin(cfg.contrast_probability, rng)) d.contrast = draw(cfg.contrast, rng);
  if (cfg.lowres_enabled && coin(cfg.lowres_probability, rng)) d.lowres_factor = draw(cfg.lowres_factor, rng);
  if (cfg.gamma_enabled && coin(cfg.inverted_gamma_probability, rng)) d.inverted_gamma = draw(cfg.gamma, rng);
  if (cfg.gamma_enabled && coin(cfg.gamma_probability, rng)) d.gamma = draw(cfg.gamma, rng);
  if (cfg.flip_enabled) d.flip = draw_flip(cfg.flip_probability, rng);
  d.noise_seed = rng();
  return d;
}

AugmentedCase apply(const VoxelGrid& image, const LabelVolume& labels, const AugmentDraw& d) {
  require_same_dims(image, labels, "augmentation");
  VoxelGrid img = image;
  LabelVolume lab = labels;
  if (d.affine) {
    img = affine(img, *d.affine);
    lab = affine(lab, *d.affine);
  }
  Rng noise_rng(d.noise_seed);
  if (d.noise_variance) img = gaussian_noise(img, *d.noise_variance, noise_rng);
  if (d.blur_sigma) img = gaussian_blur(img, *d.blur_sigma);
  if (d.brightness) img = brightness(img, *d.brightness);
  if (d.contrast) img = contrast(img, *d.contrast);
  if (d.lowres_factor) img = simulate_low_resolution(img, *d.lowres_factor);
  if (d.inverted_gamma) img = gamma_correct(img, *d.inverted_gamma, true);
  if (d.gamma) img = gamma_correct(img, *d.gamma, false);
  img = flip(img, d.flip);
  lab = flip(lab, d.flip);
  return {std::move(img), std::move(lab)};
}

AugmentedCase augment_case(const VoxelGrid& image, const LabelVolume& labels, const AugmentConfig& cfg, Rng& rng) {
  return apply(image, labels, draw_augmentation(cfg, rng));
}

}  // namespace pedseg::augment
