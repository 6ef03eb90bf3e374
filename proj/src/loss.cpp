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

#include "pedseg/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pedseg/config.hpp"
#include "pedseg/distance.hpp"
#include "pedseg/error.hpp"
#include "pedseg/morphology.hpp"
#include "pedseg/simd/kernels.hpp"

namespace pedseg::nn {

LabelTensor::LabelTensor(Shape5 s, std::vector<int> l) : shape(s), labels(std::move(l)) {
  if (s.c != 1) fail(Errc::ShapeMismatch, "label tensor must have one channel");
  if (labels.size() != s.numel()) fail(Errc::ShapeMismatch, "label data length does not match " + to_string(s));
  for (int v : labels) {
    if (v < 0) fail(Errc::InvalidLabel, "class labels must be nonnegative");
  }
}

int LabelTensor::at(int n, int z, int y, int x) const {
  return labels[((static_cast<std::size_t>(n) * static_cast<std::size_t>(shape.d) + static_cast<std::size_t>(z)) *
                     static_cast<std::size_t>(shape.h) +
                 static_cast<std::size_t>(y)) *
                    static_cast<std::size_t>(shape.w) +
                static_cast<std::size_t>(x)];
}

Tensor5 one_hot(const LabelTensor& target, int classes) {
  Shape5 s = target.shape;
  s.c = classes;
  Tensor5 t(s);
  const std::size_t m = s.spatial();
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t v = 0; v < m; ++v) {
      const int label = target.labels[static_cast<std::size_t>(n) * m + v];
      if (label >= classes) {
        fail(Errc::InvalidLabel, "label " + std::to_string(label) + " outside " + std::to_string(classes) + " classes");
      }
      t.plane(n, label)[v] = 1.0;
    }
  }
  return t;
}

Tensor5 softmax(const Tensor5& logits) {
  const Shape5& s = logits.shape();
  Tensor5 p(s);
  const std::size_t m = s.spatial();
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t v = 0; v < m; ++v) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < s.c; ++c) mx = std::max(mx, logits.plane(n, c)[v]);
      double z = 0.0;
      for (int c = 0; c < s.c; ++c) {
        const double e = std::exp(logits.plane(n, c)[v] - mx);
        p.plane(n, c)[v] = e;
        z += e;
      }
      for (int c = 0; c < s.c; ++c) p.plane(n, c)[v] /= z;
    }
  }
  return p;
}

Tensor5 softmax_backward(const Tensor5& probs, const Tensor5& grad_probs) {
  const Shape5& s = probs.shape();
  if (!(grad_probs.shape() == s)) fail(Errc::ShapeMismatch, "softmax gradient shape mismatch");
  Tensor5 g(s);
  const std::size_t m = s.spatial();
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t v = 0; v < m; ++v) {
      double dot = 0.0;
      for (int c = 0; c < s.c; ++c) dot += probs.plane(n, c)[v] * grad_probs.plane(n, c)[v];
      for (int c = 0; c < s.c; ++c) {
        g.plane(n, c)[v] = probs.plane(n, c)[v] * (grad_probs.plane(n, c)[v] - dot);
      }
    }
  }
  return g;
}

namespace {

void require_pair(const Tensor5& a, const Tensor5& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    fail(Errc::ShapeMismatch, std::string(what) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  if (a.shape().c < 2) fail(Errc::ShapeMismatch, std::string(what) + " needs a background and a foreground channel");
}

struct ClassSums {
  double pg = 0.0, p = 0.0, g = 0.0;
};

ClassSums class_sums(const Tensor5& probs, const Tensor5& target, int c) {
  ClassSums s;
  for (int n = 0; n < probs.shape().n; ++n) {
    const auto p = probs.plane(n, c);
    const auto g = target.plane(n, c);
    s.pg += simd::dot(p, g);
    s.p += simd::sum(p);
    s.g += simd::sum(g);
  }
  return s;
}

Mask channel_mask(const Tensor5& t, int n, int c, const Spacing& spacing) {
  const Shape5& s = t.shape();
  const auto plane = t.plane(n, c);
  std::vector<std::uint8_t> bits(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i) bits[i] = plane[i] > 0.5 ? 1 : 0;
  return Mask(Dims{s.w, s.h, s.d}, spacing, std::move(bits));
}

std::vector<double> boundary_distance(const Mask& m) { return distance_to(boundary(m)); }

}  // namespace

LossValue soft_dice_loss(const Tensor5& probs, const Tensor5& target, double eps) {
  require_pair(probs, target, "soft dice");
  if (!(eps > 0.0)) fail(Errc::InvalidArgument, "dice eps must be positive");
  const Shape5& s = probs.shape();
  const double k = 1.0 / static_cast<double>(s.c - 1);
  LossValue out{0.0, Tensor5(s)};
  for (int c = 1; c < s.c; ++c) {
    const ClassSums cs = class_sums(probs, target, c);
    const double den = cs.p + cs.g + eps;
    out.value -= k * 2.0 * cs.pg / den;
    // d/dp_i of 2I/den = (2 g_i den - 2I) / den^2
    const double a = -k * 2.0 / den;
    const double b = k * 2.0 * cs.pg / (den * den);
    for (int n = 0; n < s.n; ++n) {
      simd::scale_shift(target.plane(n, c), out.grad.plane(n, c), a, b);
    }
  }
  return out;
}

LossValue cross_entropy_loss(const Tensor5& logits, const LabelTensor& target) {
  const Shape5& s = logits.shape();
  if (target.shape.n != s.n || target.shape.d != s.d || target.shape.h != s.h || target.shape.w != s.w) {
    fail(Errc::ShapeMismatch, "cross entropy: logits " + to_string(s) + " vs labels " + to_string(target.shape));
  }
  const Tensor5 p = softmax(logits);
  const std::size_t m = s.spatial();
  const double count = static_cast<double>(static_cast<std::size_t>(s.n) * m);
  LossValue out{0.0, Tensor5(s)};
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t v = 0; v < m; ++v) {
      const int label = target.labels[static_cast<std::size_t>(n) * m + v];
      if (label >= s.c) fail(Errc::InvalidLabel, "label outside the logit channels");
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < s.c; ++c) mx = std::max(mx, logits.plane(n, c)[v]);
      double z = 0.0;
      for (int c = 0; c < s.c; ++c) z += std::exp(logits.plane(n, c)[v] - mx);
      out.value += (std::log(z) + mx - logits.plane(n, label)[v]) / count;
      for (int c = 0; c < s.c; ++c) {
        out.grad.plane(n, c)[v] = (p.plane(n, c)[v] - (c == label ? 1.0 : 0.0)) / count;
      }
    }
  }
  return out;
}

BoundaryMaps boundary_weights(const Tensor5& probs, const Tensor5& target, const Spacing& spacing, double beta) {
  require_pair(probs, target, "boundary loss");
  if (!(beta > 0.0)) fail(Errc::InvalidArgument, "boundary loss beta must be positive");
  const Shape5& s = probs.shape();
  BoundaryMaps maps{s, std::vector<double>(s.numel(), 0.0)};
  const std::size_t m = s.spatial();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 1; c < s.c; ++c) {
      const auto dg = boundary_distance(channel_mask(target, n, c, spacing));
      const auto dp = boundary_distance(channel_mask(probs, n, c, spacing));
      double* w = maps.weight.data() + probs.offset(n, c, 0, 0, 0);
      for (std::size_t v = 0; v < m; ++v) {
        const double a = std::isfinite(dg[v]) ? std::pow(dg[v], beta) : 0.0;
        const double b = std::isfinite(dp[v]) ? std::pow(dp[v], beta) : 0.0;
        w[v] = a + b;
      }
    }
  }
  return maps;
}

LossValue boundary_hd_loss(const Tensor5& probs, const Tensor5& target, const BoundaryMaps& maps) {
  require_pair(probs, target, "boundary loss");
  if (!(maps.shape == probs.shape())) fail(Errc::ShapeMismatch, "boundary maps do not match the probabilities");
  const Shape5& s = probs.shape();
  const std::size_t m = s.spatial();
  const double count = static_cast<double>(static_cast<std::size_t>(s.n) * m * static_cast<std::size_t>(s.c - 1));
  LossValue out{0.0, Tensor5(s)};
  for (int n = 0; n < s.n; ++n) {
    for (int c = 1; c < s.c; ++c) {
      const auto p = probs.plane(n, c);
      const auto g = target.plane(n, c);
      auto gr = out.grad.plane(n, c);
      const double* w = maps.weight.data() + probs.offset(n, c, 0, 0, 0);
      for (std::size_t v = 0; v < m; ++v) {
        const double e = p[v] - g[v];
        out.value += e * e * w[v] / count;
        gr[v] = 2.0 * e * w[v] / count;
      }
    }
  }
  return out;
}

LossValue boundary_hd_loss(const Tensor5& probs, const Tensor5& target, const Spacing& spacing, double beta) {
  return boundary_hd_loss(probs, target, boundary_weights(probs, target, spacing, beta));
}

LossValue fp_regularizer(const Tensor5& probs, const Tensor5& target, double theta) {
  require_pair(probs, target, "fp regularizer");
  if (!(theta >= 0.0)) fail(Errc::InvalidArgument, "theta must be nonnegative");
  const Shape5& s = probs.shape();
  const double k = theta / static_cast<double>(s.c - 1);
  LossValue out{0.0, Tensor5(s)};
  for (int c = 1; c < s.c; ++c) {
    const ClassSums cs = class_sums(probs, target, c);
    const double den = cs.p + cs.g;
    if (!(den > 0.0)) continue;
    const double fp = cs.p - cs.pg;
    out.value += k * fp / den;
    // d/dp_i of FP/den = ((1 - g_i) den - FP) / den^2
    const double a = -k / den;
    const double b = k * (den - fp) / (den * den);
    for (int n = 0; n < s.n; ++n) {
      simd::scale_shift(target.plane(n, c), out.grad.plane(n, c), a, b);
    }
  }
  return out;
}

void LossConfig::validate() const {
  if (!(theta >= 0.0)) fail(Errc::ConfigError, "loss theta must be nonnegative");
  if (!(dice_eps > 0.0)) fail(Errc::ConfigError, "dice eps must be positive");
  if (!(hd_beta > 0.0)) fail(Errc::ConfigError, "hd beta must be positive");
  for (double w : {w_dice, w_ce, w_hd, w_fp}) {
    if (!std::isfinite(w)) fail(Errc::ConfigError, "loss term weights must be finite");
  }
}

LossConfig LossConfig::from(const KeyValueConfig& cfg) {
  LossConfig c;
  c.theta = cfg.get_double("loss.theta", c.theta);
  c.dice_eps = cfg.get_double("loss.dice_eps", c.dice_eps);
  c.hd_beta = cfg.get_double("loss.hd_beta", c.hd_beta);
  c.w_dice = cfg.get_double("loss.w_dice", c.w_dice);
  c.w_ce = cfg.get_double("loss.w_ce", c.w_ce);
  c.w_hd = cfg.get_double("loss.w_hd", c.w_hd);
  c.w_fp = cfg.get_double("loss.w_fp", c.w_fp);
  c.validate();
  return c;
}

nlohmann::json LossConfig::to_json() const {
  return {{"theta", theta}, {"dice_eps", dice_eps}, {"hd_beta", hd_beta}, {"w_dice", w_dice},
          {"w_ce", w_ce},   {"w_hd", w_hd},         {"w_fp", w_fp}};
}

LossBreakdown composite_loss(const Tensor5& logits, const LabelTensor& target, const LossConfig& cfg,
                             const BoundaryMaps& maps) {
  cfg.validate();
  const Tensor5 probs = softmax(logits);
  const Tensor5 onehot = one_hot(target, logits.shape().c);
  const LossValue dice = soft_dice_loss(probs, onehot, cfg.dice_eps);
  const LossValue ce = cross_entropy_loss(logits, target);
  const LossValue hd = boundary_hd_loss(probs, onehot, maps);
  const LossValue fp = fp_regularizer(probs, onehot, cfg.theta);

  LossBreakdown out;
  out.dice = dice.value;
  out.ce = ce.value;
  out.hd = hd.value;
  out.fp = fp.value;
  out.total = cfg.w_dice * dice.value + cfg.w_ce * ce.value + cfg.w_hd * hd.value + cfg.w_fp * fp.value;

  Tensor5 grad_probs(probs.shape());
  simd::axpy(cfg.w_dice, dice.grad.value(), grad_probs.value());
  simd::axpy(cfg.w_hd, hd.grad.value(), grad_probs.value());
  simd::axpy(cfg.w_fp, fp.grad.value(), grad_probs.value());
  out.grad_logits = softmax_backward(probs, grad_probs);
  simd::axpy(cfg.w_ce, ce.grad.value(), out.grad_logits.value());
  return out;
}

LossBreakdown composite_loss(const Tensor5& logits, const LabelTensor& target, const LossConfig& cfg) {
  const Tensor5 probs = softmax(logits);
  const Tensor5 onehot = one_hot(target, logits.shape().c);
  return composite_loss(logits, target, cfg, boundary_weights(probs, onehot, cfg.spacing, cfg.hd_beta));
}

}  // namespace pedseg::nn
