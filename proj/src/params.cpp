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

#include "pedseg/params.hpp"

#include <algorithm>
#include <sstream>

#include "pedseg/conv.hpp"
#include "pedseg/error.hpp"
#include "pedseg/layers.hpp"

namespace pedseg::nn {

ChannelPlan::ChannelPlan(std::vector<int> decoder, std::vector<int> encoder)
    : decoder_(std::move(decoder)), encoder_(std::move(encoder)) {
  if (decoder_.empty()) fail(Errc::InvalidArgument, "channel plan needs at least one stage");
  if (decoder_.size() != encoder_.size()) fail(Errc::InvalidArgument, "encoder and decoder stage counts differ");
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    if (decoder_[i] < 1) fail(Errc::InvalidArgument, "channel widths must be positive");
    if (encoder_[i] != 2 * decoder_[i]) {
      fail(Errc::InvalidArgument, "stage " + std::to_string(i) + ": encoder width " + std::to_string(encoder_[i]) +
                                      " is not twice the decoder width " + std::to_string(decoder_[i]));
    }
  }
}

ChannelPlan ChannelPlan::from_decoder(std::vector<int> decoder) {
  std::vector<int> encoder(decoder.size());
  std::ranges::transform(decoder, encoder.begin(), [](int f) { return 2 * f; });
  return ChannelPlan(std::move(decoder), std::move(encoder));
}

ChannelPlan ChannelPlan::nnunet_default() { return from_decoder({32, 64, 128, 256, 320, 320}); }

CountConfig CountConfig::baseline() {
  CountConfig c;
  c.widen_encoder = false;
  c.residual_se = false;
  return c;
}

CountConfig CountConfig::widened() { return CountConfig{}; }

CountConfig CountConfig::depthwise_separable() {
  CountConfig c;
  c.separable = true;
  return c;
}

CountConfig CountConfig::preset(const std::string& name) {
  if (name == "baseline") return baseline();
  if (name == "widened") return widened();
  if (name == "separable") return depthwise_separable();
  fail(Errc::InvalidArgument, "unknown variant '" + name + "' (expected baseline, widened or separable)");
}

std::size_t standard_conv_params(int k, int c_in, int c_out) {
  return ConvSpec::standard(k, c_in, c_out).weight_count();
}

std::size_t separable_conv_params(int k, int c_in, int c_out) {
  return ConvSpec::depthwise(k, c_in).weight_count() + ConvSpec::pointwise(c_in, c_out).weight_count();
}

namespace {

std::size_t norm_params(int c) { return 2 * static_cast<std::size_t>(c); }

// One k^3 convolution followed by instance norm. The separable form carries its
// own inner norm between the depthwise and pointwise halves.
void add_conv_unit(const CountConfig& cfg, int c_in, int c_out, std::size_t& conv, std::size_t& norm) {
  if (cfg.separable) {
    conv += separable_conv_params(cfg.kernel, c_in, c_out);
    norm += norm_params(c_in);
  } else {
    conv += standard_conv_params(cfg.kernel, c_in, c_out);
  }
  norm += norm_params(c_out);
}

}  // namespace

ParameterReport count_parameters(const ChannelPlan& plan, const CountConfig& cfg) {
  if (cfg.in_channels < 1 || cfg.num_classes < 1 || cfg.kernel < 1 || cfg.residual_blocks < 0) {
    fail(Errc::InvalidArgument, "count config needs positive channels, classes and kernel");
  }
  const std::size_t L = plan.stages();
  const auto& dec = plan.decoder_channels();
  const std::vector<int>& enc = cfg.widen_encoder ? plan.encoder_channels() : dec;

  ParameterReport r;
  r.config = cfg;
  r.stages.resize(L);
  for (std::size_t i = 0; i < L; ++i) {
    StageCount& s = r.stages[i];
    s.stage = static_cast<int>(i);
    s.encoder_width = enc[i];
    const int c_prev = i == 0 ? cfg.in_channels : enc[i - 1];
    add_conv_unit(cfg, c_prev, enc[i], s.encoder_conv, s.encoder_norm);
    if (cfg.residual_se) {
      for (int b = 0; b < cfg.residual_blocks; ++b) {
        add_conv_unit(cfg, enc[i], enc[i], s.encoder_conv, s.encoder_norm);
        add_conv_unit(cfg, enc[i], enc[i], s.encoder_conv, s.encoder_norm);
        s.encoder_se += SeWeights::zeros(enc[i], cfg.se_reduction).parameter_count(cfg.se_bias);
      }
    } else {
      add_conv_unit(cfg, enc[i], enc[i], s.encoder_conv, s.encoder_norm);
    }
    if (i + 1 < L) {
      s.decoder_width = dec[i];
      const int below = i + 2 == L ? enc[i + 1] : dec[i + 1];
      s.decoder_upsample = ConvSpec::transposed(2, 2, below, dec[i]).weight_count();
      add_conv_unit(cfg, dec[i] + enc[i], dec[i], s.decoder_conv, s.decoder_norm);
      add_conv_unit(cfg, dec[i], dec[i], s.decoder_conv, s.decoder_norm);
    }
  }
  const int head_in = L == 1 ? enc[0] : dec[0];
  r.head = ConvSpec::pointwise(head_in, cfg.num_classes, true).parameter_count(true);
  return r;
}

std::size_t ParameterReport::encoder_conv_total() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.encoder_conv;
  return n;
}

std::size_t ParameterReport::total() const {
  std::size_t n = head;
  for (const auto& s : stages) n += s.total();
  return n;
}

nlohmann::json to_json(const ParameterReport& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"stage", s.stage},
                      {"encoder_width", s.encoder_width},
                      {"decoder_width", s.decoder_width},
                      {"encoder_conv", s.encoder_conv},
                      {"encoder_norm", s.encoder_norm},
                      {"encoder_se", s.encoder_se},
                      {"decoder_upsample", s.decoder_upsample},
                      {"decoder_conv", s.decoder_conv},
                      {"decoder_norm", s.decoder_norm},
                      {"total", s.total()}});
  }
  const auto& c = r.config;
  return {{"config",
           {{"widen_encoder", c.widen_encoder},
            {"residual_se", c.residual_se},
            {"separable", c.separable},
            {"in_channels", c.in_channels},
            {"num_classes", c.num_classes},
            {"kernel", c.kernel},
            {"residual_blocks", c.residual_blocks},
            {"se_reduction", c.se_reduction},
            {"se_bias", c.se_bias}}},
          {"stages", stages},
          {"head", r.head},
          {"encoder_conv_total", r.encoder_conv_total()},
          {"total", r.total()}};
}

std::string format_table(const ParameterReport& r) {
  std::ostringstream os;
  os << "stage  enc_w  dec_w  enc_conv    enc_norm  enc_se    dec_up      dec_conv    dec_norm  total\n";
  auto col = [&](auto v, int w) {
    std::string s = std::to_string(v);
    os << s << std::string(static_cast<std::size_t>(std::max(1, w - static_cast<int>(s.size()))), ' ');
  };
  for (const auto& s : r.stages) {
    col(s.stage, 7);
    col(s.encoder_width, 7);
    col(s.decoder_width, 7);
    col(s.encoder_conv, 12);
    col(s.encoder_norm, 10);
    col(s.encoder_se, 10);
    col(s.decoder_upsample, 12);
    col(s.decoder_conv, 12);
    col(s.decoder_norm, 10);
    os << s.total() << '\n';
  }
  os << "head " << r.head << "\ntotal " << r.total() << '\n';
  return os.str();
}

}  // namespace pedseg::nn
