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

#include <vector>

#include <json.hpp>

#include "pedseg/tensor.hpp"
#include "pedseg/volume.hpp"

namespace pedseg {
class KeyValueConfig;
}

namespace pedseg::nn {

/// Integer class per voxel, shaped (n, 1, d, h, w).
struct LabelTensor {
  Shape5 shape;
  std::vector<int> labels;

  LabelTensor() = default;
  LabelTensor(Shape5 s, std::vector<int> l);
  int at(int n, int z, int y, int x) const;
};

Tensor5 one_hot(const LabelTensor& target, int classes);
/// Channel-wise normalized exponential.
Tensor5 softmax(const Tensor5& logits);
/// Pulls a probability gradient back through softmax.
Tensor5 softmax_backward(const Tensor5& probs, const Tensor5& grad_probs);

struct LossValue {
  double value = 0.0;
  Tensor5 grad;  // d value / d input, same shape as the differentiated input
};

/// Sums pool over batch and space per foreground class (channel 0 is background).
LossValue soft_dice_loss(const Tensor5& probs, const Tensor5& target, double eps = 1e-5);
LossValue cross_entropy_loss(const Tensor5& logits, const LabelTensor& target);

/// Distance maps per (n, c) for foreground classes, in mm, to the boundary
/// of the target and of the thresholded (p > 0.5) prediction.
struct BoundaryMaps {
  Shape5 shape;
  std::vector<double> weight;  // D_g^beta + D_p^beta, zero on channel 0
};
BoundaryMaps boundary_weights(const Tensor5& probs, const Tensor5& target, const Spacing& spacing, double beta);
/// Mean over voxels and foreground classes of (p - g)^2 * w; w is constant.
LossValue boundary_hd_loss(const Tensor5& probs, const Tensor5& target, const BoundaryMaps& maps);
LossValue boundary_hd_loss(const Tensor5& probs, const Tensor5& target, const Spacing& spacing, double beta = 2.0);

/// theta * N_FP / (N_pred + N_gt) from soft counts, averaged over foreground
/// classes; a class with N_pred + N_gt = 0 contributes 0.
LossValue fp_regularizer(const Tensor5& probs, const Tensor5& target, double theta = 0.1);

struct LossConfig {
  double theta = 0.1;
  double dice_eps = 1e-5;
  double hd_beta = 2.0;
  double w_dice = 1.0;
  double w_ce = 1.0;
  double w_hd = 1.0;
  double w_fp = 1.0;
  Spacing spacing{};

  void validate() const;
  static LossConfig from(const KeyValueConfig& cfg);
  nlohmann::json to_json() const;
};

struct LossBreakdown {
  double dice = 0.0;  // the signed term, i.e. -Dice
  double ce = 0.0;
  double hd = 0.0;
  double fp = 0.0;
  double total = 0.0;
  Tensor5 grad_logits;
};

/// -Dice + CE + HD + FP on softmax(logits); gradient w.r.t. the logits.
LossBreakdown composite_loss(const Tensor5& logits, const LabelTensor& target, const LossConfig& cfg);
/// Same, with precomputed boundary maps (held constant).
LossBreakdown composite_loss(const Tensor5& logits, const LabelTensor& target, const LossConfig& cfg,
                             const BoundaryMaps& maps);

}  // namespace pedseg::nn
