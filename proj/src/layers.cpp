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

#include "pedseg/layers.hpp"

#include <algorithm>
#include <cmath>

#include "pedseg/error.hpp"
#include "pedseg/simd/kernels.hpp"

namespace pedseg::nn {

namespace {

thread_local ActivationTrace* active_trace = nullptr;

}  // namespace

ActivationTrace::ActivationTrace() : previous_(active_trace) { active_trace = this; }
ActivationTrace::~ActivationTrace() { active_trace = previous_; }
ActivationTrace* ActivationTrace::current() { return active_trace; }
void ActivationTrace::record(std::span<const double> inputs) {
  for (double x : inputs) signs_.push_back(x > 0 ? 1 : 0);
}

namespace {

void require_shape(const Tensor5& t, const Shape5& expected, const char* what) {
  if (!(t.shape() == expected)) {
    fail(Errc::ContextMismatch, std::string(what) + ": gradient " + to_string(t.shape()) +
                                    " does not match the saved forward shape " + to_string(expected));
  }
}

void require_channels(std::span<const double> v, int channels, const char* what) {
  if (v.size() != static_cast<std::size_t>(channels)) {
    fail(Errc::ShapeMismatch, std::string(what) + " must have one entry per channel");
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Tensor5 instance_norm(const Tensor5& x, std::span<const double> scale, std::span<const double> shift, double eps,
                      NormContext* ctx) {
  const Shape5& s = x.shape();
  require_channels(scale, s.c, "instance norm scale");
  require_channels(shift, s.c, "instance norm shift");
  const std::size_t m = s.spatial();
  Tensor5 y(s);
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(static_cast<std::size_t>(s.n) * static_cast<std::size_t>(s.c));
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const auto in = x.plane(n, c);
      const double mean = simd::sum(in) / static_cast<double>(m);
      const double var = simd::sum_sq_dev(in, mean) / static_cast<double>(m);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(n) * static_cast<std::size_t>(s.c) + static_cast<std::size_t>(c)] = is;
      const std::size_t off = x.offset(n, c, 0, 0, 0);
      const std::span<double> xh(xhat.data() + off, m);
      simd::scale_shift(in, xh, is, -mean * is);
      const auto c_idx = static_cast<std::size_t>(c);
      simd::scale_shift(xh, y.plane(n, c), scale[c_idx], shift[c_idx]);
    }
  }
  if (ctx) {
    ctx->shape = s;
    ctx->xhat = std::move(xhat);
    ctx->inv_std = std::move(inv_std);
  }
  return y;
}

NormGrads instance_norm_backward(const Tensor5& grad_out, const NormContext& ctx, std::span<const double> scale) {
  require_shape(grad_out, ctx.shape, "instance norm");
  const Shape5& s = ctx.shape;
  require_channels(scale, s.c, "instance norm scale");
  const std::size_t m = s.spatial();
  const double md = static_cast<double>(m);
  NormGrads g{Tensor5(s), std::vector<double>(static_cast<std::size_t>(s.c), 0.0),
              std::vector<double>(static_cast<std::size_t>(s.c), 0.0)};
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = grad_out.offset(n, c, 0, 0, 0);
      const std::span<const double> gy = grad_out.value().subspan(off, m);
      const std::span<const double> xh(ctx.xhat.data() + off, m);
      const auto c_idx = static_cast<std::size_t>(c);
      const double sum_gy = simd::sum(gy);
      const double sum_gy_xh = simd::dot(gy, xh);
      g.grad_shift[c_idx] += sum_gy;
      g.grad_scale[c_idx] += sum_gy_xh;
      const double is = ctx.inv_std[static_cast<std::size_t>(n) * static_cast<std::size_t>(s.c) + c_idx];
      const double k = scale[c_idx] * is / md;
      auto gx = g.grad_x.plane(n, c);
      for (std::size_t i = 0; i < m; ++i) {
        gx[i] = k * (md * gy[i] - sum_gy - xh[i] * sum_gy_xh);
      }
    }
  }
  return g;
}

Tensor5 leaky_relu(const Tensor5& x, double slope, ActContext* ctx) {
  Tensor5 y(x.shape());
  auto in = x.value();
  auto out = y.value();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0 ? in[i] : slope * in[i];
  if (active_trace) active_trace->record(in);
  if (ctx) {
    ctx->shape = x.shape();
    ctx->input.assign(in.begin(), in.end());
    ctx->slope = slope;
  }
  return y;
}

Tensor5 leaky_relu_backward(const Tensor5& grad_out, const ActContext& ctx) {
  require_shape(grad_out, ctx.shape, "leaky relu");
  Tensor5 g(ctx.shape);
  auto gy = grad_out.value();
  auto gx = g.value();
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = ctx.input[i] > 0 ? gy[i] : ctx.slope * gy[i];
  return g;
}

int SeWeights::hidden_width(int channels, int reduction) {
  if (channels < 1 || reduction < 1) fail(Errc::ShapeMismatch, "SE needs positive channels and reduction");
  return std::max(1, channels / reduction);
}

SeWeights SeWeights::zeros(int channels, int reduction) {
  SeWeights w;
  w.channels = channels;
  w.hidden = hidden_width(channels, reduction);
  const auto c = static_cast<std::size_t>(channels);
  const auto h = static_cast<std::size_t>(w.hidden);
  w.w1.assign(h * c, 0.0);
  w.b1.assign(h, 0.0);
  w.w2.assign(c * h, 0.0);
  w.b2.assign(c, 0.0);
  return w;
}

void SeWeights::validate() const {
  const auto c = static_cast<std::size_t>(channels);
  const auto h = static_cast<std::size_t>(hidden);
  if (channels < 1 || hidden < 1 || w1.size() != h * c || b1.size() != h || w2.size() != c * h || b2.size() != c) {
    fail(Errc::ShapeMismatch, "SE weights inconsistent with channels/hidden width");
  }
}

std::size_t SeWeights::parameter_count(bool with_bias) const {
  return w1.size() + w2.size() + (with_bias ? b1.size() + b2.size() : 0);
}

Tensor5 se_attention(const Tensor5& x, const SeWeights& w, SeContext* ctx) {
  w.validate();
  const Shape5& s = x.shape();
  if (s.c != w.channels) fail(Errc::ShapeMismatch, "SE channel count does not match the input");
  const auto C = static_cast<std::size_t>(s.c);
  const auto H = static_cast<std::size_t>(w.hidden);
  const double m = static_cast<double>(s.spatial());
  std::vector<double> sq(static_cast<std::size_t>(s.n) * C), hp(static_cast<std::size_t>(s.n) * H),
      gate(static_cast<std::size_t>(s.n) * C);
  Tensor5 y(s);
  for (int n = 0; n < s.n; ++n) {
    const auto nb = static_cast<std::size_t>(n);
    for (std::size_t c = 0; c < C; ++c) sq[nb * C + c] = simd::sum(x.plane(n, static_cast<int>(c))) / m;
    const std::span<const double> sn(sq.data() + nb * C, C);
    std::vector<double> h(H);
    for (std::size_t j = 0; j < H; ++j) {
      hp[nb * H + j] = w.b1[j] + simd::dot(std::span<const double>(w.w1.data() + j * C, C), sn);
      h[j] = std::max(0.0, hp[nb * H + j]);
    }
    if (active_trace) active_trace->record(std::span<const double>(hp.data() + nb * H, H));
    for (std::size_t c = 0; c < C; ++c) {
      const double z = w.b2[c] + simd::dot(std::span<const double>(w.w2.data() + c * H, H), h);
      gate[nb * C + c] = sigmoid(z);
      simd::scale_shift(x.plane(n, static_cast<int>(c)), y.plane(n, static_cast<int>(c)), gate[nb * C + c], 0.0);
    }
  }
  if (ctx) {
    ctx->shape = s;
    ctx->input.assign(x.value().begin(), x.value().end());
    ctx->squeeze = std::move(sq);
    ctx->hidden_pre = std::move(hp);
    ctx->gate = std::move(gate);
  }
  return y;
}

SeGrads se_attention_backward(const Tensor5& grad_out, const SeContext& ctx, const SeWeights& w) {
  require_shape(grad_out, ctx.shape, "SE attention");
  w.validate();
  const Shape5& s = ctx.shape;
  const auto C = static_cast<std::size_t>(s.c);
  const auto H = static_cast<std::size_t>(w.hidden);
  const std::size_t m = s.spatial();
  SeGrads g{Tensor5(s), SeWeights::zeros(s.c)};
  g.grad.hidden = w.hidden;
  g.grad.w1.assign(H * C, 0.0);
  g.grad.b1.assign(H, 0.0);
  g.grad.w2.assign(C * H, 0.0);
  for (int n = 0; n < s.n; ++n) {
    const auto nb = static_cast<std::size_t>(n);
    std::vector<double> dz2(C), dh(H, 0.0), ds(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = grad_out.offset(n, static_cast<int>(c), 0, 0, 0);
      const double dgate = simd::dot(grad_out.value().subspan(off, m), std::span<const double>(ctx.input.data() + off, m));
      const double gt = ctx.gate[nb * C + c];
      dz2[c] = dgate * gt * (1.0 - gt);
      g.grad.b2[c] += dz2[c];
      for (std::size_t j = 0; j < H; ++j) {
        const double h = std::max(0.0, ctx.hidden_pre[nb * H + j]);
        g.grad.w2[c * H + j] += dz2[c] * h;
        dh[j] += w.w2[c * H + j] * dz2[c];
      }
    }
    for (std::size_t j = 0; j < H; ++j) {
      const double dhp = ctx.hidden_pre[nb * H + j] > 0 ? dh[j] : 0.0;
      g.grad.b1[j] += dhp;
      for (std::size_t c = 0; c < C; ++c) {
        g.grad.w1[j * C + c] += dhp * ctx.squeeze[nb * C + c];
        ds[c] += w.w1[j * C + c] * dhp;
      }
    }
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = grad_out.offset(n, static_cast<int>(c), 0, 0, 0);
      simd::scale_shift(grad_out.value().subspan(off, m), g.grad_x.plane(n, static_cast<int>(c)), ctx.gate[nb * C + c],
                        ds[c] / static_cast<double>(m));
    }
  }
  return g;
}

Tensor5 drop_path(const Tensor5& x, double p, Mode mode, Rng& rng, DropPathContext* ctx) {
  if (!(p >= 0.0 && p < 1.0)) fail(Errc::InvalidArgument, "drop path probability must lie in [0, 1)");
  const Shape5& s = x.shape();
  std::vector<double> scale(static_cast<std::size_t>(s.n), 1.0);
  if (mode == Mode::Train && p > 0.0) {
    std::bernoulli_distribution keep(1.0 - p);
    for (auto& v : scale) v = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  }
  Tensor5 y(s);
  const std::size_t per = static_cast<std::size_t>(s.c) * s.spatial();
  for (int n = 0; n < s.n; ++n) {
    const std::size_t off = static_cast<std::size_t>(n) * per;
    simd::scale_shift(x.value().subspan(off, per), y.value().subspan(off, per), scale[static_cast<std::size_t>(n)], 0.0);
  }
  if (ctx) {
    ctx->shape = s;
    ctx->sample_scale = std::move(scale);
  }
  return y;
}

Tensor5 drop_path_backward(const Tensor5& grad_out, const DropPathContext& ctx) {
  require_shape(grad_out, ctx.shape, "drop path");
  Tensor5 g(ctx.shape);
  const std::size_t per = static_cast<std::size_t>(ctx.shape.c) * ctx.shape.spatial();
  for (int n = 0; n < ctx.shape.n; ++n) {
    const std::size_t off = static_cast<std::size_t>(n) * per;
    simd::scale_shift(grad_out.value().subspan(off, per), g.value().subspan(off, per),
                      ctx.sample_scale[static_cast<std::size_t>(n)], 0.0);
  }
  return g;
}

Tensor5 add(const Tensor5& a, const Tensor5& b) {
  if (!(a.shape() == b.shape())) fail(Errc::ShapeMismatch, "add: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor5 y(a.shape(), std::vector<double>(a.value().begin(), a.value().end()));
  simd::axpy(1.0, b.value(), y.value());
  return y;
}

Tensor5 concat_channels(const Tensor5& a, const Tensor5& b) {
  const Shape5 sa = a.shape(), sb = b.shape();
  if (sa.n != sb.n || sa.d != sb.d || sa.h != sb.h || sa.w != sb.w) {
    fail(Errc::ShapeMismatch, "concat: " + to_string(sa) + " vs " + to_string(sb));
  }
  Shape5 so = sa;
  so.c = sa.c + sb.c;
  Tensor5 y(so);
  for (int n = 0; n < so.n; ++n) {
    for (int c = 0; c < sa.c; ++c) std::ranges::copy(a.plane(n, c), y.plane(n, c).begin());
    for (int c = 0; c < sb.c; ++c) std::ranges::copy(b.plane(n, c), y.plane(n, sa.c + c).begin());
  }
  return y;
}

std::pair<Tensor5, Tensor5> split_channels(const Tensor5& g, int channels_a) {
  Shape5 sa = g.shape(), sb = g.shape();
  if (channels_a < 1 || channels_a >= g.shape().c) fail(Errc::ShapeMismatch, "split point outside the channel range");
  sa.c = channels_a;
  sb.c = g.shape().c - channels_a;
  std::pair<Tensor5, Tensor5> out{Tensor5(sa), Tensor5(sb)};
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c) std::ranges::copy(g.plane(n, c), out.first.plane(n, c).begin());
    for (int c = 0; c < sb.c; ++c) std::ranges::copy(g.plane(n, sa.c + c), out.second.plane(n, c).begin());
  }
  return out;
}

// ---- modules ---------------------------------------------------------------

Conv3d::Conv3d(const std::string& name, const ConvSpec& spec)
    : weight(name + ".weight", spec.weight_shape()), spec_(spec) {
  spec.validate();
  weight.fan_in = spec.fan_in();
  if (spec.bias) bias = Param(name + ".bias", {static_cast<std::size_t>(spec.out_channels)});
}

Tensor5 Conv3d::forward(const Tensor5& x, std::optional<Spatial3> output_size) {
  has_ctx_ = true;
  return conv3d_forward(x, spec_, weight.value, bias.value, &ctx_, output_size);
}

Tensor5 Conv3d::backward(const Tensor5& grad_out) {
  if (!has_ctx_) fail(Errc::ContextMismatch, "conv backward called before forward");
  ConvGrads g = conv3d_backward(grad_out, ctx_, weight.value);
  simd::axpy(1.0, g.grad_w, weight.grad);
  if (spec_.bias) simd::axpy(1.0, g.grad_b, bias.grad);
  return std::move(g.grad_x);
}

std::vector<Param*> Conv3d::params() {
  if (spec_.bias) return {&weight, &bias};
  return {&weight};
}

InstanceNorm::InstanceNorm(const std::string& name, int channels, double eps)
    : scale(name + ".scale", {static_cast<std::size_t>(channels)}, 1.0),
      shift(name + ".shift", {static_cast<std::size_t>(channels)}, 0.0),
      eps_(eps) {}

Tensor5 InstanceNorm::forward(const Tensor5& x) {
  has_ctx_ = true;
  return instance_norm(x, scale.value, shift.value, eps_, &ctx_);
}

Tensor5 InstanceNorm::backward(const Tensor5& grad_out) {
  if (!has_ctx_) fail(Errc::ContextMismatch, "instance norm backward called before forward");
  NormGrads g = instance_norm_backward(grad_out, ctx_, scale.value);
  simd::axpy(1.0, g.grad_scale, scale.grad);
  simd::axpy(1.0, g.grad_shift, shift.grad);
  return std::move(g.grad_x);
}

std::vector<Param*> InstanceNorm::params() { return {&scale, &shift}; }

SqueezeExcite::SqueezeExcite(const std::string& name, int channels, int reduction)
    : channels_(channels), hidden_(SeWeights::hidden_width(channels, reduction)) {
  const auto c = static_cast<std::size_t>(channels);
  const auto h = static_cast<std::size_t>(hidden_);
  w1 = Param(name + ".w1", {h, c});
  b1 = Param(name + ".b1", {h});
  w2 = Param(name + ".w2", {c, h});
  w1.fan_in = c;
  w2.fan_in = h;
  b2 = Param(name + ".b2", {c});
}

SeWeights SqueezeExcite::weights() const {
  return SeWeights{channels_, hidden_, w1.value, b1.value, w2.value, b2.value};
}

Tensor5 SqueezeExcite::forward(const Tensor5& x) {
  has_ctx_ = true;
  return se_attention(x, weights(), &ctx_);
}

Tensor5 SqueezeExcite::backward(const Tensor5& grad_out) {
  if (!has_ctx_) fail(Errc::ContextMismatch, "SE backward called before forward");
  SeGrads g = se_attention_backward(grad_out, ctx_, weights());
  simd::axpy(1.0, g.grad.w1, w1.grad);
  simd::axpy(1.0, g.grad.b1, b1.grad);
  simd::axpy(1.0, g.grad.w2, w2.grad);
  simd::axpy(1.0, g.grad.b2, b2.grad);
  return std::move(g.grad_x);
}

std::vector<Param*> SqueezeExcite::params() { return {&w1, &b1, &w2, &b2}; }

ConvNormAct::ConvNormAct(const std::string& name, const ConvSpec& spec, double eps, double slope)
    : conv(name + ".conv", spec), norm(name + ".norm", spec.out_channels, eps), slope_(slope) {}

Tensor5 ConvNormAct::forward(const Tensor5& x) { return leaky_relu(norm.forward(conv.forward(x)), slope_, &act_); }

Tensor5 ConvNormAct::backward(const Tensor5& grad_out) {
  return conv.backward(norm.backward(leaky_relu_backward(grad_out, act_)));
}

std::vector<Param*> ConvNormAct::params() {
  std::vector<Param*> out = conv.params();
  for (Param* p : norm.params()) out.push_back(p);
  return out;
}

ResidualSEBlock::ResidualSEBlock(const std::string& name, int channels, const BlockConfig& cfg)
    : conv1(name + ".conv1", ConvSpec::standard(cfg.kernel, channels, channels)),
      conv2(name + ".conv2", ConvSpec::standard(cfg.kernel, channels, channels)),
      norm1(name + ".norm1", channels, cfg.eps),
      norm2(name + ".norm2", channels, cfg.eps),
      se(name + ".se", channels, cfg.se_reduction),
      cfg_(cfg) {
  if (!(cfg.drop_path >= 0.0 && cfg.drop_path < 1.0)) fail(Errc::InvalidArgument, "drop path probability must lie in [0, 1)");
}

Tensor5 ResidualSEBlock::forward(const Tensor5& x, Mode mode, Rng& rng) {
  Tensor5 f = norm1.forward(conv1.forward(x));
  f = leaky_relu(f, cfg_.slope, &act1_);
  f = norm2.forward(conv2.forward(f));
  f = drop_path(f, cfg_.drop_path, mode, rng, &drop_);
  f = se.forward(f);
  return leaky_relu(add(x, f), cfg_.slope, &act_out_);
}

Tensor5 ResidualSEBlock::backward(const Tensor5& grad_out) {
  Tensor5 g_sum = leaky_relu_backward(grad_out, act_out_);
  Tensor5 g = se.backward(g_sum);
  g = drop_path_backward(g, drop_);
  g = conv2.backward(norm2.backward(g));
  g = leaky_relu_backward(g, act1_);
  g = conv1.backward(norm1.backward(g));
  return add(g_sum, g);
}

std::vector<Param*> ResidualSEBlock::params() {
  std::vector<Param*> out;
  for (auto* list : {&conv1, &conv2}) for (Param* p : list->params()) out.push_back(p);
  for (auto* list : {&norm1, &norm2}) for (Param* p : list->params()) out.push_back(p);
  for (Param* p : se.params()) out.push_back(p);
  return out;
}

DepthwiseSeparableBlock::DepthwiseSeparableBlock(const std::string& name, int c_in, int c_out, int stride,
                                                 const BlockConfig& cfg)
    : depthwise(name + ".depthwise", ConvSpec::depthwise(cfg.kernel, c_in, stride)),
      pointwise(name + ".pointwise", ConvSpec::pointwise(c_in, c_out)),
      norm1(name + ".norm1", c_in, cfg.eps),
      norm2(name + ".norm2", c_out, cfg.eps),
      cfg_(cfg) {}

Tensor5 DepthwiseSeparableBlock::forward(const Tensor5& x) {
  Tensor5 y = leaky_relu(norm1.forward(depthwise.forward(x)), cfg_.slope, &act1_);
  return leaky_relu(norm2.forward(pointwise.forward(y)), cfg_.slope, &act2_);
}

Tensor5 DepthwiseSeparableBlock::backward(const Tensor5& grad_out) {
  Tensor5 g = pointwise.backward(norm2.backward(leaky_relu_backward(grad_out, act2_)));
  return depthwise.backward(norm1.backward(leaky_relu_backward(g, act1_)));
}

std::vector<Param*> DepthwiseSeparableBlock::params() {
  std::vector<Param*> out = depthwise.params();
  for (Param* p : norm1.params()) out.push_back(p);
  for (Param* p : pointwise.params()) out.push_back(p);
  for (Param* p : norm2.params()) out.push_back(p);
  return out;
}

void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

std::size_t parameter_count(const std::vector<Param*>& params) {
  std::size_t n = 0;
  for (const Param* p : params) n += p->size();
  return n;
}

}  // namespace pedseg::nn
