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

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace pedseg::nn {

/// Per-stage feature widths. The encoder is always twice the decoder.
class ChannelPlan {
 public:
  ChannelPlan(std::vector<int> decoder, std::vector<int> encoder);

  static ChannelPlan from_decoder(std::vector<int> decoder);
  /// {32, 64, 128, 256, 320, 320} decoder, {64, ..., 640} encoder.
  static ChannelPlan nnunet_default();

  const std::vector<int>& decoder_channels() const { return decoder_; }
  const std::vector<int>& encoder_channels() const { return encoder_; }
  std::size_t stages() const { return decoder_.size(); }

 private:
  std::vector<int> decoder_;
  std::vector<int> encoder_;
};

/// Which network the counter describes. The encoder runs at decoder width
/// unless `widen_encoder` is set.
struct CountConfig {
  bool widen_encoder = true;
  bool residual_se = true;
  bool separable = false;
  int in_channels = 4;
  int num_classes = 5;
  int kernel = 3;
  int residual_blocks = 1;
  int se_reduction = 16;
  bool se_bias = true;

  static CountConfig baseline();
  static CountConfig widened();
  static CountConfig depthwise_separable();
  static CountConfig preset(const std::string& name);
};

struct StageCount {
  int stage = 0;
  int encoder_width = 0;
  int decoder_width = 0;  // 0 for the bottleneck
  std::size_t encoder_conv = 0;
  std::size_t encoder_norm = 0;
  std::size_t encoder_se = 0;
  std::size_t decoder_upsample = 0;
  std::size_t decoder_conv = 0;
  std::size_t decoder_norm = 0;

  std::size_t encoder_total() const { return encoder_conv + encoder_norm + encoder_se; }
  std::size_t decoder_total() const { return decoder_upsample + decoder_conv + decoder_norm; }
  std::size_t total() const { return encoder_total() + decoder_total(); }
};

struct ParameterReport {
  CountConfig config;
  std::vector<StageCount> stages;
  std::size_t head = 0;

  std::size_t encoder_conv_total() const;
  std::size_t total() const;
};

std::size_t standard_conv_params(int k, int c_in, int c_out);
/// Depthwise k^3 * C_in plus pointwise C_in * C_out.
std::size_t separable_conv_params(int k, int c_in, int c_out);

ParameterReport count_parameters(const ChannelPlan& plan, const CountConfig& cfg);

nlohmann::json to_json(const ParameterReport& r);
std::string format_table(const ParameterReport& r);

}  // namespace pedseg::nn
