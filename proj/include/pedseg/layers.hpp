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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pedseg/conv.hpp"
#include "pedseg/tensor.hpp"

namespace pedseg::nn {

// Functional ops. Each forward can save a context; each backward takes the
// upstream gradient (carried in the value buffer of a Tensor5) and returns the
// input gradient the same way, plus parameter gradients where applicable.

/// While alive on a thread, records the sign of every rectifier input seen by
/// leaky_relu and the SE hidden layer. Gradient checking uses it to tell when
/// a finite-difference step crossed an activation kink.
class ActivationTrace {
 public:
  ActivationTrace();
  ~ActivationTrace();
  ActivationTrace(const ActivationTrace&) = delete;
  ActivationTrace& operator=(const ActivationTrace&) = delete;

  const std::vector<std::uint8_t>& signs() const { return signs_; }
  void clear() { signs_.clear(); }
  void record(std::span<const double> inputs);
  static ActivationTrace* current();

 private:
  std::vector<std::uint8_t> signs_;
  ActivationTrace* previous_;
};

inline constexpr double kNormEps = 1e-5;
inline constexpr double kLeakySlope = 0.01;
inline constexpr int kSeReduction = 16;
inline constexpr double kDropPathProb = 0.05;

struct NormContext {
  Shape5 shape;
  std::vector<double> xhat;
  std::vector<double> inv_std;  // one per (n, c)
};
struct NormGrads {
  Tensor5 grad_x;
  std::vector<double> grad_scale;
  std::vector<double> grad_shift;
};
Tensor5 instance_norm(const Tensor5& x, std::span<const double> scale, std::span<const double> shift,
                      double eps = kNormEps, NormContext* ctx = nullptr);
NormGrads instance_norm_backward(const Tensor5& grad_out, const NormContext& ctx, std::span<const double> scale);

struct ActContext {
  Shape5 shape;
  std::vector<double> input;
  double slope = kLeakySlope;
};
Tensor5 leaky_relu(const Tensor5& x, double slope = kLeakySlope, ActContext* ctx = nullptr);
Tensor5 leaky_relu_backward(const Tensor5& grad_out, const ActContext& ctx);

/// Squeeze-excitation weights: w1 [hidden][C], b1 [hidden], w2 [C][hidden], b2 [C].
struct SeWeights {
  int channels = 0;
  int hidden = 0;
  std::vector<double> w1, b1, w2, b2;

  static int hidden_width(int channels, int reduction = kSeReduction);
  static SeWeights zeros(int channels, int reduction = kSeReduction);
  void validate() const;
  std::size_t parameter_count(bool with_bias) const;
};
struct SeContext {
  Shape5 shape;
  std::vector<double> input;
  std::vector<double> squeeze;  // [n][C]
  std::vector<double> hidden_pre;  // [n][hidden]
  std::vector<double> gate;     // [n][C]
};
struct SeGrads {
  Tensor5 grad_x;
  SeWeights grad;
};
Tensor5 se_attention(const Tensor5& x, const SeWeights& w, SeContext* ctx = nullptr);
SeGrads se_attention_backward(const Tensor5& grad_out, const SeContext& ctx, const SeWeights& w);

struct DropPathContext {
  Shape5 shape;
  std::vector<double> sample_scale;  // 0 or 1/(1-p) per batch element
};
Tensor5 drop_path(const Tensor5& x, double p, Mode mode, Rng& rng, DropPathContext* ctx = nullptr);
Tensor5 drop_path_backward(const Tensor5& grad_out, const DropPathContext& ctx);

Tensor5 add(const Tensor5& a, const Tensor5& b);
Tensor5 concat_channels(const Tensor5& a, const Tensor5& b);
/// Splits a channel-concatenated gradient back into the two inputs.
std::pair<Tensor5, Tensor5> split_channels(const Tensor5& g, int channels_a);

// Stateful modules own their parameters and the context of the last forward
// call. A module instance is single-threaded.

class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(const std::string& name, const ConvSpec& spec);

  Tensor5 forward(const Tensor5& x, std::optional<Spatial3> output_size = std::nullopt);
  Tensor5 backward(const Tensor5& grad_out);
  std::vector<Param*> params();
  const ConvSpec& spec() const { return spec_; }

  Param weight;
  Param bias;

 private:
  ConvSpec spec_;
  ConvContext ctx_;
  bool has_ctx_ = false;
};

class InstanceNorm {
 public:
  InstanceNorm() = default;
  InstanceNorm(const std::string& name, int channels, double eps = kNormEps);

  Tensor5 forward(const Tensor5& x);
  Tensor5 backward(const Tensor5& grad_out);
  std::vector<Param*> params();

  Param scale;
  Param shift;

 private:
  double eps_ = kNormEps;
  NormContext ctx_;
  bool has_ctx_ = false;
};

class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(const std::string& name, int channels, int reduction = kSeReduction);

  Tensor5 forward(const Tensor5& x);
  Tensor5 backward(const Tensor5& grad_out);
  std::vector<Param*> params();
  int hidden() const { return hidden_; }

  Param w1, b1, w2, b2;

 private:
  SeWeights weights() const;
  int channels_ = 0;
  int hidden_ = 0;
  SeContext ctx_;
  bool has_ctx_ = false;
};

/// conv - IN - LReLU.
class ConvNormAct {
 public:
  ConvNormAct() = default;
  ConvNormAct(const std::string& name, const ConvSpec& spec, double eps = kNormEps, double slope = kLeakySlope);

  Tensor5 forward(const Tensor5& x);
  Tensor5 backward(const Tensor5& grad_out);
  std::vector<Param*> params();

  Conv3d conv;
  InstanceNorm norm;

 private:
  double slope_ = kLeakySlope;
  ActContext act_;
};

struct BlockConfig {
  int kernel = 3;
  int se_reduction = kSeReduction;
  double drop_path = kDropPathProb;
  double eps = kNormEps;
  double slope = kLeakySlope;
};

/// y = LeakyReLU(x + SE(DropPath(F(x)))), F = conv-IN-LReLU-conv-IN.
class ResidualSEBlock {
 public:
  ResidualSEBlock() = default;
  ResidualSEBlock(const std::string& name, int channels, const BlockConfig& cfg = {});

  Tensor5 forward(const Tensor5& x, Mode mode, Rng& rng);
  Tensor5 backward(const Tensor5& grad_out);
  std::vector<Param*> params();

  Conv3d conv1, conv2;
  InstanceNorm norm1, norm2;
  SqueezeExcite se;

 private:
  BlockConfig cfg_;
  ActContext act1_, act_out_;
  DropPathContext drop_;
};

/// depthwise conv - IN - LReLU - pointwise conv - IN - LReLU.
class DepthwiseSeparableBlock {
 public:
  DepthwiseSeparableBlock() = default;
  DepthwiseSeparableBlock(const std::string& name, int c_in, int c_out, int stride = 1, const BlockConfig& cfg = {});

  Tensor5 forward(const Tensor5& x);
  Tensor5 backward(const Tensor5& grad_out);
  std::vector<Param*> params();

  Conv3d depthwise, pointwise;
  InstanceNorm norm1, norm2;

 private:
  BlockConfig cfg_;
  ActContext act1_, act2_;
};

void zero_grads(const std::vector<Param*>& params);
std::size_t parameter_count(const std::vector<Param*>& params);

}  // namespace pedseg::nn
