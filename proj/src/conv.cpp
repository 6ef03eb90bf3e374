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

#include "pedseg/conv.hpp"

#include <algorithm>

#include "pedseg/error.hpp"
#include "pedseg/simd/kernels.hpp"

namespace pedseg::nn {

ConvSpec ConvSpec::standard(int k, int c_in, int c_out, int stride, bool bias) {
  return {ConvKind::Standard, k, stride, c_in, c_out, bias};
}
ConvSpec ConvSpec::depthwise(int k, int channels, int stride, bool bias) {
  return {ConvKind::Depthwise, k, stride, channels, channels, bias};
}
ConvSpec ConvSpec::pointwise(int c_in, int c_out, bool bias) { return {ConvKind::Pointwise, 1, 1, c_in, c_out, bias}; }
ConvSpec ConvSpec::transposed(int k, int stride, int c_in, int c_out, bool bias) {
  return {ConvKind::Transposed, k, stride, c_in, c_out, bias};
}

void ConvSpec::validate() const {
  if (kernel < 1 || stride < 1 || in_channels < 1 || out_channels < 1) {
    fail(Errc::ShapeMismatch, "conv spec needs positive kernel, stride and channels");
  }
  switch (kind) {
    case ConvKind::Depthwise:
      if (out_channels != in_channels) fail(Errc::ShapeMismatch, "depthwise conv requires C_out == C_in");
      [[fallthrough]];
    case ConvKind::Standard:
      if (kernel % 2 == 0) fail(Errc::ShapeMismatch, "same-padded conv requires an odd kernel");
      break;
    case ConvKind::Pointwise:
      if (kernel != 1 || stride != 1) fail(Errc::ShapeMismatch, "pointwise conv requires k = 1, stride 1");
      break;
    case ConvKind::Transposed:
      if (kernel < stride) fail(Errc::ShapeMismatch, "transposed conv requires kernel >= stride");
      break;
  }
}

int ConvSpec::padding() const {
  if (kind == ConvKind::Transposed) return (kernel - stride) / 2;
  return kernel / 2;
}

std::size_t ConvSpec::weight_count() const {
  const auto k3 = static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel);
  const auto ci = static_cast<std::size_t>(in_channels);
  const auto co = static_cast<std::size_t>(out_channels);
  switch (kind) {
    case ConvKind::Standard: return k3 * ci * co;
    case ConvKind::Depthwise: return k3 * ci;
    case ConvKind::Pointwise: return ci * co;
    case ConvKind::Transposed: return k3 * ci * co;
  }
  return 0;
}

std::size_t ConvSpec::fan_in() const {
  const auto k3 = static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel);
  return kind == ConvKind::Depthwise ? k3 : k3 * static_cast<std::size_t>(in_channels);
}

std::vector<std::size_t> ConvSpec::weight_shape() const {
  const auto k = static_cast<std::size_t>(kernel);
  const auto ci = static_cast<std::size_t>(in_channels);
  const auto co = static_cast<std::size_t>(out_channels);
  switch (kind) {
    case ConvKind::Standard: return {co, ci, k, k, k};
    case ConvKind::Depthwise: return {ci, k, k, k};
    case ConvKind::Pointwise: return {co, ci};
    case ConvKind::Transposed: return {ci, co, k, k, k};
  }
  return {};
}

Shape5 conv_output_shape(const Shape5& in, const ConvSpec& spec, std::optional<Spatial3> output_size) {
  spec.validate();
  if (in.c != spec.in_channels) {
    fail(Errc::ShapeMismatch, "conv expects " + std::to_string(spec.in_channels) + " input channels, got " +
                                  std::to_string(in.c));
  }
  Shape5 out = in;
  out.c = spec.out_channels;
  const int s = spec.stride, k = spec.kernel, p = spec.padding();
  if (spec.kind == ConvKind::Transposed) {
    const Spatial3 def{in.d * s, in.h * s, in.w * s};
    const Spatial3 sz = output_size.value_or(def);
    const Spatial3 src{in.d, in.h, in.w};
    for (int a = 0; a < 3; ++a) {
      const int max_size = (src[static_cast<std::size_t>(a)] - 1) * s + k - p;
      if (sz[static_cast<std::size_t>(a)] < 1 || sz[static_cast<std::size_t>(a)] > max_size) {
        fail(Errc::ShapeMismatch, "transposed conv output size out of range");
      }
    }
    out.d = sz[0], out.h = sz[1], out.w = sz[2];
    return out;
  }
  if (output_size) fail(Errc::ShapeMismatch, "output_size only applies to transposed convolutions");
  auto len = [&](int n) { return (n + 2 * p - k) / s + 1; };
  out.d = len(in.d), out.h = len(in.h), out.w = len(in.w);
  return out;
}

namespace {

struct Geometry {
  int di, hi, wi;  // input spatial
  int do_, ho, wo; // output spatial
  int stride, pad;
};

// out += w * in shifted by one kernel tap (forward of a gather convolution).
void tap_forward(const double* in, double* out, double w, int kz, int ky, int kx, const Geometry& g) {
  const auto& kern = simd::active();
  const int s = g.stride, p = g.pad;
  for (int zo = 0; zo < g.do_; ++zo) {
    const int zi = zo * s + kz - p;
    if (zi < 0 || zi >= g.di) continue;
    for (int yo = 0; yo < g.ho; ++yo) {
      const int yi = yo * s + ky - p;
      if (yi < 0 || yi >= g.hi) continue;
      const double* irow = in + (static_cast<std::size_t>(zi) * g.hi + yi) * g.wi;
      double* orow = out + (static_cast<std::size_t>(zo) * g.ho + yo) * g.wo;
      if (s == 1) {
        const int lo = std::max(0, p - kx);
        const int hi = std::min(g.wo, g.wi + p - kx);
        if (lo < hi) kern.axpy(w, irow + lo + kx - p, orow + lo, static_cast<std::size_t>(hi - lo));
      } else {
        for (int xo = 0; xo < g.wo; ++xo) {
          const int xi = xo * s + kx - p;
          if (xi >= 0 && xi < g.wi) orow[xo] += w * irow[xi];
        }
      }
    }
  }
}

// Adjoint of tap_forward: gin += w * gout, returns <gout, in> for the weight.
double tap_backward(const double* in, const double* gout, double* gin, double w, int kz, int ky, int kx,
                    const Geometry& g) {
  const auto& kern = simd::active();
  const int s = g.stride, p = g.pad;
  double gw = 0.0;
  for (int zo = 0; zo < g.do_; ++zo) {
    const int zi = zo * s + kz - p;
    if (zi < 0 || zi >= g.di) continue;
    for (int yo = 0; yo < g.ho; ++yo) {
      const int yi = yo * s + ky - p;
      if (yi < 0 || yi >= g.hi) continue;
      const std::size_t ioff = (static_cast<std::size_t>(zi) * g.hi + yi) * g.wi;
      const std::size_t ooff = (static_cast<std::size_t>(zo) * g.ho + yo) * g.wo;
      if (s == 1) {
        const int lo = std::max(0, p - kx);
        const int hi = std::min(g.wo, g.wi + p - kx);
        if (lo >= hi) continue;
        const auto len = static_cast<std::size_t>(hi - lo);
        kern.axpy(w, gout + ooff + lo, gin + ioff + lo + kx - p, len);
        gw += kern.dot(gout + ooff + lo, in + ioff + lo + kx - p, len);
      } else {
        for (int xo = 0; xo < g.wo; ++xo) {
          const int xi = xo * s + kx - p;
          if (xi < 0 || xi >= g.wi) continue;
          gin[ioff + xi] += w * gout[ooff + xo];
          gw += gout[ooff + xo] * in[ioff + xi];
        }
      }
    }
  }
  return gw;
}

// Transposed conv scatters each input voxel: out[i*s + k - p] += w * in[i].
void scatter_forward(const double* in, double* out, double w, int kz, int ky, int kx, const Geometry& g) {
  const int s = g.stride, p = g.pad;
  for (int zi = 0; zi < g.di; ++zi) {
    const int zo = zi * s + kz - p;
    if (zo < 0 || zo >= g.do_) continue;
    for (int yi = 0; yi < g.hi; ++yi) {
      const int yo = yi * s + ky - p;
      if (yo < 0 || yo >= g.ho) continue;
      const double* irow = in + (static_cast<std::size_t>(zi) * g.hi + yi) * g.wi;
      double* orow = out + (static_cast<std::size_t>(zo) * g.ho + yo) * g.wo;
      for (int xi = 0; xi < g.wi; ++xi) {
        const int xo = xi * s + kx - p;
        if (xo >= 0 && xo < g.wo) orow[xo] += w * irow[xi];
      }
    }
  }
}

double scatter_backward(const double* in, const double* gout, double* gin, double w, int kz, int ky, int kx,
                        const Geometry& g) {
  const int s = g.stride, p = g.pad;
  double gw = 0.0;
  for (int zi = 0; zi < g.di; ++zi) {
    const int zo = zi * s + kz - p;
    if (zo < 0 || zo >= g.do_) continue;
    for (int yi = 0; yi < g.hi; ++yi) {
      const int yo = yi * s + ky - p;
      if (yo < 0 || yo >= g.ho) continue;
      const std::size_t ioff = (static_cast<std::size_t>(zi) * g.hi + yi) * g.wi;
      const std::size_t ooff = (static_cast<std::size_t>(zo) * g.ho + yo) * g.wo;
      for (int xi = 0; xi < g.wi; ++xi) {
        const int xo = xi * s + kx - p;
        if (xo < 0 || xo >= g.wo) continue;
        gin[ioff + xi] += w * gout[ooff + xo];
        gw += in[ioff + xi] * gout[ooff + xo];
      }
    }
  }
  return gw;
}

Geometry geometry_of(const Shape5& in, const Shape5& out, const ConvSpec& spec) {
  return {in.d, in.h, in.w, out.d, out.h, out.w, spec.stride, spec.padding()};
}

// Flat index of weight (o, i, kz, ky, kx) for each layout.
std::size_t weight_index(const ConvSpec& spec, int o, int i, int kz, int ky, int kx) {
  const auto k = static_cast<std::size_t>(spec.kernel);
  const std::size_t tap = (static_cast<std::size_t>(kz) * k + static_cast<std::size_t>(ky)) * k + static_cast<std::size_t>(kx);
  const std::size_t k3 = k * k * k;
  switch (spec.kind) {
    case ConvKind::Standard:
    case ConvKind::Pointwise:
      return (static_cast<std::size_t>(o) * static_cast<std::size_t>(spec.in_channels) + static_cast<std::size_t>(i)) * k3 + tap;
    case ConvKind::Depthwise: return static_cast<std::size_t>(o) * k3 + tap;
    case ConvKind::Transposed:
      return (static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.out_channels) + static_cast<std::size_t>(o)) * k3 + tap;
  }
  return 0;
}

}  // namespace

Tensor5 conv3d_forward(const Tensor5& x, const ConvSpec& spec, std::span<const double> weight,
                       std::span<const double> bias, ConvContext* ctx, std::optional<Spatial3> output_size) {
  const Shape5 out_shape = conv_output_shape(x.shape(), spec, output_size);
  if (weight.size() != spec.weight_count()) fail(Errc::ShapeMismatch, "conv weight has the wrong length");
  if (bias.size() != spec.bias_count()) fail(Errc::ShapeMismatch, "conv bias has the wrong length");

  Tensor5 y(out_shape);
  const Geometry g = geometry_of(x.shape(), out_shape, spec);
  const int k = spec.kernel;
  for (int n = 0; n < out_shape.n; ++n) {
    for (int o = 0; o < out_shape.c; ++o) {
      auto out = y.plane(n, o);
      if (!bias.empty()) std::fill(out.begin(), out.end(), bias[static_cast<std::size_t>(o)]);
      const int i_lo = spec.kind == ConvKind::Depthwise ? o : 0;
      const int i_hi = spec.kind == ConvKind::Depthwise ? o + 1 : spec.in_channels;
      for (int i = i_lo; i < i_hi; ++i) {
        const double* in = x.plane(n, i).data();
        for (int kz = 0; kz < k; ++kz)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const double w = weight[weight_index(spec, o, i, kz, ky, kx)];
              if (w == 0.0) continue;
              if (spec.kind == ConvKind::Transposed) scatter_forward(in, out.data(), w, kz, ky, kx, g);
              else tap_forward(in, out.data(), w, kz, ky, kx, g);
            }
      }
    }
  }
  if (ctx) {
    ctx->spec = spec;
    ctx->in_shape = x.shape();
    ctx->out_shape = out_shape;
    ctx->input.assign(x.value().begin(), x.value().end());
  }
  return y;
}

ConvGrads conv3d_backward(const Tensor5& grad_out, const ConvContext& ctx, std::span<const double> weight) {
  if (!(grad_out.shape() == ctx.out_shape)) {
    fail(Errc::ContextMismatch, "upstream gradient " + to_string(grad_out.shape()) +
                                    " does not match the saved forward output " + to_string(ctx.out_shape));
  }
  const ConvSpec& spec = ctx.spec;
  if (weight.size() != spec.weight_count()) fail(Errc::ContextMismatch, "weight length differs from the forward call");

  ConvGrads g{Tensor5(ctx.in_shape), std::vector<double>(spec.weight_count(), 0.0),
              std::vector<double>(spec.bias_count(), 0.0)};
  const Tensor5 input(ctx.in_shape, ctx.input);
  const Geometry geo = geometry_of(ctx.in_shape, ctx.out_shape, spec);
  const int k = spec.kernel;
  for (int n = 0; n < ctx.out_shape.n; ++n) {
    for (int o = 0; o < ctx.out_shape.c; ++o) {
      const auto gout = grad_out.value().subspan(grad_out.offset(n, o, 0, 0, 0), ctx.out_shape.spatial());
      if (!g.grad_b.empty()) g.grad_b[static_cast<std::size_t>(o)] += simd::sum(gout);
      const int i_lo = spec.kind == ConvKind::Depthwise ? o : 0;
      const int i_hi = spec.kind == ConvKind::Depthwise ? o + 1 : spec.in_channels;
      for (int i = i_lo; i < i_hi; ++i) {
        const double* in = input.plane(n, i).data();
        double* gin = g.grad_x.plane(n, i).data();
        for (int kz = 0; kz < k; ++kz)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const std::size_t wi = weight_index(spec, o, i, kz, ky, kx);
              const double w = weight[wi];
              g.grad_w[wi] += spec.kind == ConvKind::Transposed
                                  ? scatter_backward(in, gout.data(), gin, w, kz, ky, kx, geo)
                                  : tap_backward(in, gout.data(), gin, w, kz, ky, kx, geo);
            }
      }
    }
  }
  return g;
}

}  // namespace pedseg::nn
