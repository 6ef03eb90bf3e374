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

#include <span>
#include <vector>

#include <json.hpp>

#include "pedseg/tensor.hpp"

namespace pedseg {
class KeyValueConfig;
}

namespace pedseg::nn {

/// eta0 * (1 + cos(pi t / T)) / 2 for 0 <= t <= T.
double cosine_lr(long long t, long long horizon, double eta0);

struct OptimizerConfig {
  double eta0 = 1e-2;
  double momentum = 0.99;
  double weight_decay = 3e-5;
  bool nesterov = true;
  long long horizon = 1000;

  void validate() const;
  static OptimizerConfig from(const KeyValueConfig& cfg);
  static OptimizerConfig from(const KeyValueConfig& cfg, const OptimizerConfig& base);
  /// Settings used by the toy training runs (shorter horizon, lighter momentum).
  static OptimizerConfig toy();
  nlohmann::json to_json() const;
};

class OptimizerState {
 public:
  explicit OptimizerState(OptimizerConfig cfg = {});

  const OptimizerConfig& config() const { return cfg_; }
  long long epoch() const { return t_; }
  double learning_rate() const { return cosine_lr(t_, cfg_.horizon, cfg_.eta0); }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

  /// One update of every parameter from its accumulated gradient at the
  /// current epoch's learning rate, then advances the epoch counter.
  void step(const std::vector<Param*>& params);

 private:
  OptimizerConfig cfg_;
  long long t_ = 0;
  std::vector<std::vector<double>> velocity_;
};

/// Single-array update: g += wd * w; v = mu v + g; w -= lr * (nesterov ? g + mu v : v).
void sgd_step(std::span<double> weights, std::span<const double> grads, std::span<double> velocity, double lr,
              const OptimizerConfig& cfg);

}  // namespace pedseg::nn
