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
#include <span>
#include <vector>

#include "pedseg/tensor.hpp"

namespace pedseg::nn {

enum class ConvKind { Standard, Depthwise, Pointwise, Transposed };

/// Weight layouts:
///   Standard   [C_out][C_in][k][k][k]
///   Depthwise  [C][k][k][k]
///   Pointwise  [C_out][C_in]
///   Transposed [C_in][C_out][k][k][k]
/// Standard and depthwise convolutions zero-pad by k/2 ("same" at stride 1,
/// ceil(n/2) at stride 2).
struct ConvSpec {
  ConvKind kind = ConvKind::Standard;
  int kernel = 3;
  int stride = 1;
  int in_channels = 1;
  int out_channels = 1;
  bool bias = false;

  static ConvSpec standard(int k, int c_in, int c_out, int stride = 1, bool bias = false);
  static ConvSpec depthwise(int k, int channels, int stride = 1, bool bias = false);
  static ConvSpec pointwise(int c_in, int c_out, bool bias = false);
  static ConvSpec transposed(int k, int stride, int c_in, int c_out, bool bias = false);

  void validate() const;
  int padding() const;
  std::size_t weight_count() const;
  /// dim_in for initialization: C_in * k^3 (k^3 for depthwise).
  std::size_t fan_in() const;
  std::size_t bias_count() const { return bias ? static_cast<std::size_t>(out_channels) : 0; }
  std::size_t parameter_count(bool with_bias) const { return weight_count() + (with_bias ? bias_count() : 0); }
  std::vector<std::size_t> weight_shape() const;
  bool operator==(const ConvSpec&) const = default;
};

using Spatial3 = std::array<int, 3>;  // (d, h, w)

/// Output shape; `output_size` only applies to transposed convolutions and
/// defaults to stride * input.
Shape5 conv_output_shape(const Shape5& in, const ConvSpec& spec, std::optional<Spatial3> output_size = std::nullopt);

struct ConvContext {
  ConvSpec spec;
  Shape5 in_shape;
  Shape5 out_shape;
  std::vector<double> input;
};

Tensor5 conv3d_forward(const Tensor5& x, const ConvSpec& spec, std::span<const double> weight,
                       std::span<const double> bias, ConvContext* ctx = nullptr,
                       std::optional<Spatial3> output_size = std::nullopt);

struct ConvGrads {
  Tensor5 grad_x;  // gradient w.r.t. the input, stored in the value buffer
  std::vector<double> grad_w;
  std::vector<double> grad_b;
};

ConvGrads conv3d_backward(const Tensor5& grad_out, const ConvContext& ctx, std::span<const double> weight);

}  // namespace pedseg::nn
