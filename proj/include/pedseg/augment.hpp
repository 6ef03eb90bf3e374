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

#pragma once

#include <array>
#include <optional>
#include <random>
#include <utility>

#include <json.hpp>

#include "pedseg/volume.hpp"

namespace pedseg {

class KeyValueConfig;

namespace augment {

using Rng = std::mt19937_64;
using Range = std::pair<double, double>;

/// Which axes (x, y, z) to reverse. Drawn once and applied to an image and
/// its labels alike.
struct FlipDraw {
  std::array<bool, 3> axes{false, false, false};
};
FlipDraw draw_flip(const std::array<double, 3>& probabilities, Rng& rng);
VoxelGrid flip(const VoxelGrid& grid, const FlipDraw& draw);
LabelVolume flip(const LabelVolume& labels, const FlipDraw& draw);

VoxelGrid gaussian_noise(const VoxelGrid& grid, double variance, Rng& rng);
/// Separable normalized Gaussian, sigma in voxels, truncated at 3 sigma, edges clamped.
VoxelGrid gaussian_blur(const VoxelGrid& grid, double sigma);

VoxelGrid brightness(const VoxelGrid& grid, double multiplier);
/// mean + (x - mean) * factor
VoxelGrid contrast(const VoxelGrid& grid, double factor);
/// Rescale to [0, 1], raise to gamma, rescale back. `inverted` applies the
/// power to 1 - x instead. A constant volume is returned unchanged.
VoxelGrid gamma_correct(const VoxelGrid& grid, double gamma, bool inverted = false);

/// Antialiased trilinear downsample to round(n * factor) per axis (tent
/// widened to the sampling step), then corner-aligned trilinear back to n.
VoxelGrid simulate_low_resolution(const VoxelGrid& grid, double factor);

/// Rotation (radians, applied x then y then z) about the volume centre in
/// physical space, composed with isotropic scaling. Outside samples are 0.
struct AffineDraw {
  double rx = 0.0, ry = 0.0, rz = 0.0;
  double scale = 1.0;
};
VoxelGrid affine(const VoxelGrid& grid, const AffineDraw& draw);
/// Nearest-neighbour, so only existing labels (or 0) appear.
LabelVolume affine(const LabelVolume& labels, const AffineDraw& draw);

struct AugmentConfig {
  bool affine_enabled = true;
  double affine_probability = 0.2;
  Range rotation_deg{-30.0, 30.0};
  Range scale{0.7, 1.4};
  bool noise_enabled = true;
  double noise_probability = 0.1;
  Range noise_variance{0.0, 0.1};
  bool blur_enabled = true;
  double blur_probability = 0.2;
  Range blur_sigma{0.5, 1.0};
  bool brightness_enabled = true;
  double brightness_probability = 0.15;
  Range brightness{0.75, 1.25};
  bool contrast_enabled = true;
  double contrast_probability = 0.15;
  Range contrast{0.75, 1.25};
  bool lowres_enabled = true;
  double lowres_probability = 0.25;
  Range lowres_factor{0.5, 1.0};
  bool gamma_enabled = true;
  double gamma_probability = 0.3;
  double inverted_gamma_probability = 0.1;
  Range gamma{0.7, 1.5};
  bool flip_enabled = true;
  std::array<double, 3> flip_probability{0.5, 0.5, 0.5};
  bool elastic_enabled = false;  // reserved slot; elastic deformation is not implemented

  void validate() const;
  static AugmentConfig from(const KeyValueConfig& cfg);
  nlohmann::json to_json() const;
};

/// Every random choice for one case, so a pair can be transformed identically.
struct AugmentDraw {
  std::optional<AffineDraw> affine;
  std::optional<double> noise_variance;
  std::optional<double> blur_sigma;
  std::optional<double> brightness;
  std::optional<double> contrast;
  std::optional<double> lowres_factor;
  std::optional<double> gamma;
  std::optional<double> inverted_gamma;
  FlipDraw flip;
  std::uint64_t noise_seed = 0;
};
AugmentDraw draw_augmentation(const AugmentConfig& cfg, Rng& rng);

struct AugmentedCase {
  VoxelGrid image;
  LabelVolume labels;
};
/// Spatial transforms go to both volumes, intensity transforms to the image.
AugmentedCase apply(const VoxelGrid& image, const LabelVolume& labels, const AugmentDraw& draw);
AugmentedCase augment_case(const VoxelGrid& image, const LabelVolume& labels, const AugmentConfig& cfg, Rng& rng);

}  // namespace augment
}  // namespace pedseg
