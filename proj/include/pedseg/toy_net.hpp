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

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "pedseg/layers.hpp"
#include "pedseg/loss.hpp"
#include "pedseg/optim.hpp"
#include "pedseg/params.hpp"

namespace pedseg {
class KeyValueConfig;
}

namespace pedseg::nn {

struct ToyNetConfig {
  std::vector<int> decoder_channels{4, 8, 16};
  int in_channels = 1;
  int num_classes = 2;
  bool widen_encoder = true;
  bool residual_se = true;
  BlockConfig block{};

  ChannelPlan plan() const { return ChannelPlan::from_decoder(decoder_channels); }
  /// The parameter-counter configuration describing this network.
  CountConfig count_config() const;
};

/// Small encoder-decoder: per encoder stage a (strided) conv unit followed by
/// a residual-SE block (or a plain conv unit); per decoder stage a transposed
/// conv, skip concatenation and two conv units; pointwise head with bias.
class ToyUNet {
 public:
  explicit ToyUNet(const ToyNetConfig& cfg);
  ~ToyUNet();
  ToyUNet(ToyUNet&&) noexcept;
  ToyUNet& operator=(ToyUNet&&) noexcept;

  Tensor5 forward(const Tensor5& x, Mode mode, Rng& rng);
  /// Accumulates parameter gradients; returns the input gradient.
  Tensor5 backward(const Tensor5& grad_logits);
  std::vector<Param*> params();
  const ToyNetConfig& config() const { return cfg_; }

 private:
  struct Impl;
  ToyNetConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

struct Batch {
  Tensor5 image;
  LabelTensor labels;
};

/// Two-class task: one noisy bright sphere per volume.
struct BlobTaskConfig {
  int size = 8;
  int batch = 4;
  double noise = 0.1;
  double radius_min = 1.5;
  double radius_max = 3.0;
};
Batch make_blob_batch(const BlobTaskConfig& cfg, Rng& rng);

/// Three-class task: class A (bright sphere) always present, class B (dim
/// sphere) present with probability `b_probability`. B is skipped when no
/// placement clear of A turns up within 64 draws.
struct AbsentClassTaskConfig {
  int size = 8;
  int batch = 2;
  double noise = 0.1;
  double intensity_a = 1.0;
  double intensity_b = 0.6;
  double radius_min = 1.5;
  double radius_max = 2.5;
  double b_probability = 0.5;
  double decoy_probability = 1.0;
};
/// \`force_absent\` draws only B-free cases (decoys still follow their probability).
Batch make_absent_class_batch(const AbsentClassTaskConfig& cfg, Rng& rng, bool force_absent = false);

struct TrainConfig {
  int steps = 200;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  int eval_cases = 8;
  ToyNetConfig net{};
  LossConfig loss{};
  OptimizerConfig optim = OptimizerConfig::toy();
  BlobTaskConfig task{};

  static TrainConfig from(const KeyValueConfig& cfg);
  nlohmann::json to_json() const;
};

struct StepLog {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double dice_term = 0.0;
  double ce = 0.0;
  double hd = 0.0;
  double fp = 0.0;
  double train_dice = 0.0;
};
nlohmann::json to_json(const StepLog& s);

struct TrainResult {
  std::vector<StepLog> log;
  double heldout_dice = 0.0;
};

/// Argmax voxel Dice of one class, pooled over the batch.
double hard_dice(const Tensor5& logits, const LabelTensor& labels, int cls);

TrainResult train_smoke(const TrainConfig& cfg, const std::function<void(const StepLog&)>& on_step = {});

struct FpExperimentConfig {
  int seeds = 10;
  std::uint64_t base_seed = 100;
  int steps = 200;
  int eval_cases = 8;
  double theta = 0.1;
  double alpha = 1.0;
  std::vector<int> decoder_channels{4, 8};
  AbsentClassTaskConfig task{.batch = 4, .b_probability = 0.4};
  OptimizerConfig optim = OptimizerConfig::toy();

  static FpExperimentConfig from(const KeyValueConfig& cfg);
  nlohmann::json to_json() const;
};
struct FpExperimentResult {
  std::vector<double> mass_theta;  // soft class-B mass on held-out absent cases
  std::vector<double> mass_zero;
  std::vector<double> reduction;   // 1 - mass_theta / mass_zero per seed
  double median_reduction = 0.0;
  double median_mass_theta = 0.0;
  double median_mass_zero = 0.0;
};
FpExperimentResult run_fp_experiment(const FpExperimentConfig& cfg);
nlohmann::json to_json(const FpExperimentResult& r);

}  // namespace pedseg::nn
