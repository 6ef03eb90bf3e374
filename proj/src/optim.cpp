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

#include "pedseg/optim.hpp"

#include <cmath>
#include <numbers>

#include "pedseg/config.hpp"
#include "pedseg/error.hpp"

namespace pedseg::nn {

double cosine_lr(long long t, long long horizon, double eta0) {
  if (horizon < 1) fail(Errc::InvalidArgument, "cosine schedule horizon must be positive");
  if (t < 0 || t > horizon) {
    fail(Errc::OutOfHorizon, "epoch " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]");
  }
  if (t == horizon) return 0.0;
  const double ratio = static_cast<double>(t) / static_cast<double>(horizon);
  return eta0 * (1.0 + std::cos(std::numbers::pi * ratio)) / 2.0;
}

void OptimizerConfig::validate() const {
  if (!(eta0 >= 0.0) || !std::isfinite(eta0)) fail(Errc::ConfigError, "eta0 must be a finite nonnegative number");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(Errc::ConfigError, "momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail(Errc::ConfigError, "weight decay must be nonnegative");
  if (horizon < 1) fail(Errc::ConfigError, "horizon must be positive");
}

OptimizerConfig OptimizerConfig::toy() {
  OptimizerConfig c;
  c.eta0 = 0.03;
  c.momentum = 0.9;
  return c;
}

OptimizerConfig OptimizerConfig::from(const KeyValueConfig& cfg) { return from(cfg, OptimizerConfig{}); }

OptimizerConfig OptimizerConfig::from(const KeyValueConfig& cfg, const OptimizerConfig& base) {
  OptimizerConfig c = base;
  c.eta0 = cfg.get_double("optim.eta0", c.eta0);
  c.momentum = cfg.get_double("optim.momentum", c.momentum);
  c.weight_decay = cfg.get_double("optim.weight_decay", c.weight_decay);
  c.nesterov = cfg.get_bool("optim.nesterov", c.nesterov);
  c.horizon = cfg.get_int("optim.horizon", c.horizon);
  c.validate();
  return c;
}

nlohmann::json OptimizerConfig::to_json() const {
  return {{"eta0", eta0}, {"momentum", momentum}, {"weight_decay", weight_decay}, {"nesterov", nesterov},
          {"horizon", horizon}};
}

void sgd_step(std::span<double> weights, std::span<const double> grads, std::span<double> velocity, double lr,
              const OptimizerConfig& cfg) {
  if (grads.size() != weights.size() || velocity.size() != weights.size()) {
    fail(Errc::ShapeMismatch, "weights, gradients and velocity must have equal length");
  }
  const double mu = cfg.momentum;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double g = grads[i] + cfg.weight_decay * weights[i];
    velocity[i] = mu * velocity[i] + g;
    weights[i] -= lr * (cfg.nesterov ? g + mu * velocity[i] : velocity[i]);
  }
}

OptimizerState::OptimizerState(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void OptimizerState::step(const std::vector<Param*>& params) {
  if (t_ >= cfg_.horizon) fail(Errc::OutOfHorizon, "optimizer already reached its horizon");
  if (velocity_.empty()) {
    for (const Param* p : params) velocity_.emplace_back(p->size(), 0.0);
  }
  if (velocity_.size() != params.size()) fail(Errc::ShapeMismatch, "parameter list changed between steps");
  const double lr = learning_rate();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (velocity_[i].size() != params[i]->size()) fail(Errc::ShapeMismatch, "parameter '" + params[i]->name + "' changed size");
    sgd_step(params[i]->value, params[i]->grad, velocity_[i], lr, cfg_);
  }
  ++t_;
}

}  // namespace pedseg::nn
