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

#include "pedseg/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include "pedseg/conv.hpp"
#include "pedseg/error.hpp"
#include "pedseg/init.hpp"
#include "pedseg/layers.hpp"
#include "pedseg/loss.hpp"
#include "pedseg/toy_net.hpp"

namespace pedseg::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

void ProbeStats::merge(const ProbeStats& o) {
  max_rel_error = std::max(max_rel_error, o.max_rel_error);
  coordinates += o.coordinates;
  kink_retries += o.kink_retries;
  kink_skipped += o.kink_skipped;
}

namespace {

constexpr int kMaxStepShrinks = 3;

std::vector<std::size_t> sample_indices(std::size_t size, int samples, Rng& rng) {
  std::vector<std::size_t> out;
  if (size <= static_cast<std::size_t>(samples)) {
    for (std::size_t i = 0; i < size; ++i) out.push_back(i);
    return out;
  }
  std::set<std::size_t> chosen;
  std::uniform_int_distribution<std::size_t> pick(0, size - 1);
  while (chosen.size() < static_cast<std::size_t>(samples)) chosen.insert(pick(rng));
  return {chosen.begin(), chosen.end()};
}

}  // namespace

ProbeStats check_probes(std::vector<Probe>& probes, const std::function<double()>& objective, Rng& rng,
                        const GradcheckOptions& opt) {
  auto eval = [&](std::vector<std::uint8_t>& signs) {
    ActivationTrace trace;
    const double v = objective();
    signs = trace.signs();
    return v;
  };
  std::vector<std::uint8_t> base, plus, minus;
  eval(base);

  ProbeStats stats;
  for (Probe& p : probes) {
    if (p.analytic.size() != p.values.size()) fail(Errc::ShapeMismatch, "probe '" + p.name + "' gradient length differs");
    for (std::size_t idx : sample_indices(p.values.size(), opt.samples_per_array, rng)) {
      const double orig = p.values[idx];
      double h = opt.h;
      bool smooth = false;
      double numeric = 0.0;
      for (int attempt = 0; attempt <= kMaxStepShrinks; ++attempt) {
        p.values[idx] = orig + h;
        const double fp = eval(plus);
        p.values[idx] = orig - h;
        const double fm = eval(minus);
        p.values[idx] = orig;
        if (plus == base && minus == base) {
          numeric = (fp - fm) / (2.0 * h);
          smooth = true;
          break;
        }
        ++stats.kink_retries;
        h /= 10.0;
      }
      if (!smooth) {
        ++stats.kink_skipped;
        continue;
      }
      ++stats.coordinates;
      stats.max_rel_error = std::max(stats.max_rel_error, relative_error(p.analytic[idx], numeric));
    }
  }
  return stats;
}

namespace {

std::vector<double> randn(std::size_t n, Rng& rng, double scale = 1.0, double mean = 0.0) {
  std::normal_distribution<double> d(mean, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Tensor5 random_tensor(const Shape5& s, Rng& rng) { return Tensor5(s, randn(s.numel(), rng)); }

double project(const Tensor5& y, const std::vector<double>& r) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += y.value()[i] * r[i];
  return acc;
}

std::vector<double> copy_of(std::span<const double> v) { return {v.begin(), v.end()}; }

ProbeStats check_conv(const ConvSpec& spec, const Shape5& xs, std::optional<Spatial3> out_size, Rng& rng,
                      const GradcheckOptions& opt) {
  Tensor5 x = random_tensor(xs, rng);
  std::vector<double> w = randn(spec.weight_count(), rng, 0.5);
  std::vector<double> b = randn(spec.bias_count(), rng, 0.5);
  ConvContext ctx;
  const Tensor5 y = conv3d_forward(x, spec, w, b, &ctx, out_size);
  const std::vector<double> r = randn(y.numel(), rng);
  ConvGrads g = conv3d_backward(Tensor5(y.shape(), r), ctx, w);
  std::vector<Probe> probes{{"x", x.value(), copy_of(g.grad_x.value())}, {"w", w, g.grad_w}};
  if (spec.bias) probes.push_back({"b", b, g.grad_b});
  return check_probes(probes, [&] { return project(conv3d_forward(x, spec, w, b, nullptr, out_size), r); }, rng, opt);
}

Shape5 small_shape(Rng& rng, int c) {
  return {uniform_int(rng, 1, 2), c, uniform_int(rng, 3, 5), uniform_int(rng, 3, 5), uniform_int(rng, 3, 5)};
}

ProbeStats op_conv_standard(Rng& rng, const GradcheckOptions& opt) {
  const int ci = uniform_int(rng, 1, 3), co = uniform_int(rng, 1, 3);
  return check_conv(ConvSpec::standard(3, ci, co, 1, true), small_shape(rng, ci), std::nullopt, rng, opt);
}

ProbeStats op_conv_stride2(Rng& rng, const GradcheckOptions& opt) {
  const int ci = uniform_int(rng, 1, 3), co = uniform_int(rng, 1, 3);
  return check_conv(ConvSpec::standard(3, ci, co, 2, true), small_shape(rng, ci), std::nullopt, rng, opt);
}

ProbeStats op_conv_depthwise(Rng& rng, const GradcheckOptions& opt) {
  const int c = uniform_int(rng, 1, 4);
  return check_conv(ConvSpec::depthwise(3, c, uniform_int(rng, 1, 2), true), small_shape(rng, c), std::nullopt, rng, opt);
}

ProbeStats op_conv_pointwise(Rng& rng, const GradcheckOptions& opt) {
  const int ci = uniform_int(rng, 1, 4), co = uniform_int(rng, 1, 4);
  return check_conv(ConvSpec::pointwise(ci, co, true), small_shape(rng, ci), std::nullopt, rng, opt);
}

ProbeStats op_conv_transposed(Rng& rng, const GradcheckOptions& opt) {
  const int ci = uniform_int(rng, 1, 3), co = uniform_int(rng, 1, 3);
  const int k = uniform_int(rng, 2, 3);
  const Shape5 xs{1, ci, uniform_int(rng, 2, 3), uniform_int(rng, 2, 3), uniform_int(rng, 2, 3)};
  // Half the time crop to an odd skip size, as the decoder does.
  std::optional<Spatial3> out;
  if (uniform_int(rng, 0, 1)) out = Spatial3{2 * xs.d - 1, 2 * xs.h - 1, 2 * xs.w - 1};
  return check_conv(ConvSpec::transposed(k, 2, ci, co, true), xs, out, rng, opt);
}

ProbeStats op_instance_norm(Rng& rng, const GradcheckOptions& opt) {
  const int c = uniform_int(rng, 1, 3);
  Tensor5 x = random_tensor(small_shape(rng, c), rng);
  std::vector<double> scale = randn(static_cast<std::size_t>(c), rng, 0.3, 1.0);
  std::vector<double> shift = randn(static_cast<std::size_t>(c), rng, 0.3);
  NormContext ctx;
  const Tensor5 y = instance_norm(x, scale, shift, kNormEps, &ctx);
  const std::vector<double> r = randn(y.numel(), rng);
  NormGrads g = instance_norm_backward(Tensor5(y.shape(), r), ctx, scale);
  std::vector<Probe> probes{
      {"x", x.value(), copy_of(g.grad_x.value())}, {"scale", scale, g.grad_scale}, {"shift", shift, g.grad_shift}};
  return check_probes(probes, [&] { return project(instance_norm(x, scale, shift), r); }, rng, opt);
}

ProbeStats op_leaky_relu(Rng& rng, const GradcheckOptions& opt) {
  Tensor5 x = random_tensor(small_shape(rng, 2), rng);
  ActContext ctx;
  const Tensor5 y = leaky_relu(x, kLeakySlope, &ctx);
  const std::vector<double> r = randn(y.numel(), rng);
  std::vector<Probe> probes{{"x", x.value(), copy_of(leaky_relu_backward(Tensor5(y.shape(), r), ctx).value())}};
  return check_probes(probes, [&] { return project(leaky_relu(x), r); }, rng, opt);
}

ProbeStats op_se(Rng& rng, const GradcheckOptions& opt) {
  const int c = uniform_int(rng, 2, 5);
  Tensor5 x = random_tensor(small_shape(rng, c), rng);
  SeWeights w = SeWeights::zeros(c, 2);
  w.w1 = randn(w.w1.size(), rng);
  w.b1 = randn(w.b1.size(), rng, 0.5);
  w.w2 = randn(w.w2.size(), rng);
  w.b2 = randn(w.b2.size(), rng, 0.5);
  SeContext ctx;
  const Tensor5 y = se_attention(x, w, &ctx);
  const std::vector<double> r = randn(y.numel(), rng);
  SeGrads g = se_attention_backward(Tensor5(y.shape(), r), ctx, w);
  std::vector<Probe> probes{{"x", x.value(), copy_of(g.grad_x.value())},
                            {"w1", w.w1, g.grad.w1},
                            {"b1", w.b1, g.grad.b1},
                            {"w2", w.w2, g.grad.w2},
                            {"b2", w.b2, g.grad.b2}};
  return check_probes(probes, [&] { return project(se_attention(x, w), r); }, rng, opt);
}

ProbeStats check_drop_path(Mode mode, Rng& rng, const GradcheckOptions& opt) {
  Tensor5 x = random_tensor(Shape5{4, 2, 3, 3, 3}, rng);
  const std::uint64_t mask_seed = rng();
  DropPathContext ctx;
  Rng m1(mask_seed);
  const Tensor5 y = drop_path(x, 0.4, mode, m1, &ctx);
  const std::vector<double> r = randn(y.numel(), rng);
  std::vector<Probe> probes{{"x", x.value(), copy_of(drop_path_backward(Tensor5(y.shape(), r), ctx).value())}};
  return check_probes(
      probes,
      [&] {
        Rng m2(mask_seed);
        return project(drop_path(x, 0.4, mode, m2), r);
      },
      rng, opt);
}

ProbeStats op_drop_path_train(Rng& rng, const GradcheckOptions& opt) { return check_drop_path(Mode::Train, rng, opt); }
ProbeStats op_drop_path_infer(Rng& rng, const GradcheckOptions& opt) { return check_drop_path(Mode::Infer, rng, opt); }

void randomize(const std::vector<Param*>& params, Rng& rng) {
  gaussian_init(params, 1.0, rng);
  for (Param* p : params) {
    if (p->fan_in != 0) continue;
    const bool is_scale = p->name.size() >= 5 && p->name.compare(p->name.size() - 5, 5, "scale") == 0;
    p->value = randn(p->size(), rng, 0.3, is_scale ? 1.0 : 0.0);
  }
}

template <class Module, class Forward>
ProbeStats check_module(Module& m, Tensor5 x, Forward forward, Rng& rng, const GradcheckOptions& opt) {
  const auto params = m.params();
  randomize(params, rng);
  zero_grads(params);
  const Tensor5 y = forward(x);
  const std::vector<double> r = randn(y.numel(), rng);
  const Tensor5 gx = m.backward(Tensor5(y.shape(), r));
  std::vector<Probe> probes{{"x", x.value(), copy_of(gx.value())}};
  for (Param* p : params) probes.push_back({p->name, p->value, p->grad});
  return check_probes(probes, [&] { return project(forward(x), r); }, rng, opt);
}

ProbeStats check_residual(Mode mode, Rng& rng, const GradcheckOptions& opt) {
  const int c = uniform_int(rng, 2, 4);
  BlockConfig cfg;
  cfg.se_reduction = 2;
  cfg.drop_path = 0.3;
  ResidualSEBlock block("block", c, cfg);
  const std::uint64_t mask_seed = rng();
  return check_module(
      block, random_tensor(small_shape(rng, c), rng),
      [&](const Tensor5& x) {
        Rng m(mask_seed);
        return block.forward(x, mode, m);
      },
      rng, opt);
}

ProbeStats op_residual_infer(Rng& rng, const GradcheckOptions& opt) { return check_residual(Mode::Infer, rng, opt); }
ProbeStats op_residual_train(Rng& rng, const GradcheckOptions& opt) { return check_residual(Mode::Train, rng, opt); }

ProbeStats op_separable(Rng& rng, const GradcheckOptions& opt) {
  const int ci = uniform_int(rng, 1, 3), co = uniform_int(rng, 1, 3);
  DepthwiseSeparableBlock block("ds", ci, co, uniform_int(rng, 1, 2));
  return check_module(block, random_tensor(small_shape(rng, ci), rng), [&](const Tensor5& x) { return block.forward(x); },
                      rng, opt);
}

ProbeStats op_toy_unet(Rng& rng, const GradcheckOptions& opt) {
  ToyNetConfig cfg;
  cfg.decoder_channels = {2, 4};
  cfg.block.se_reduction = 2;
  ToyUNet net(cfg);
  const int n = uniform_int(rng, 4, 5);
  Rng unused(0);
  return check_module(net, random_tensor(Shape5{1, 1, n, n, n}, rng),
                      [&](const Tensor5& x) { return net.forward(x, Mode::Infer, unused); }, rng, opt);
}

struct LossProblem {
  Tensor5 logits;
  Tensor5 probs;
  LabelTensor labels;
  Tensor5 onehot;
};

LossProblem loss_problem(Rng& rng) {
  const int c = uniform_int(rng, 2, 4);
  const Shape5 s = small_shape(rng, c);
  Shape5 ls = s;
  ls.c = 1;
  std::vector<int> labels(ls.numel());
  for (auto& l : labels) l = uniform_int(rng, 0, c - 1);
  Tensor5 logits = Tensor5(s, randn(s.numel(), rng, 1.5));
  LabelTensor lt(ls, std::move(labels));
  Tensor5 probs = softmax(logits);
  Tensor5 onehot = one_hot(lt, c);
  return {std::move(logits), std::move(probs), std::move(lt), std::move(onehot)};
}

ProbeStats op_loss_dice(Rng& rng, const GradcheckOptions& opt) {
  LossProblem p = loss_problem(rng);
  std::vector<Probe> probes{{"probs", p.probs.value(), copy_of(soft_dice_loss(p.probs, p.onehot).grad.value())}};
  return check_probes(probes, [&] { return soft_dice_loss(p.probs, p.onehot).value; }, rng, opt);
}

ProbeStats op_loss_ce(Rng& rng, const GradcheckOptions& opt) {
  LossProblem p = loss_problem(rng);
  std::vector<Probe> probes{{"logits", p.logits.value(), copy_of(cross_entropy_loss(p.logits, p.labels).grad.value())}};
  return check_probes(probes, [&] { return cross_entropy_loss(p.logits, p.labels).value; }, rng, opt);
}

Spacing random_spacing(Rng& rng) {
  std::uniform_real_distribution<double> d(0.5, 2.0);
  return {d(rng), d(rng), d(rng)};
}

ProbeStats op_loss_hd(Rng& rng, const GradcheckOptions& opt) {
  LossProblem p = loss_problem(rng);
  const BoundaryMaps maps = boundary_weights(p.probs, p.onehot, random_spacing(rng), 2.0);
  std::vector<Probe> probes{{"probs", p.probs.value(), copy_of(boundary_hd_loss(p.probs, p.onehot, maps).grad.value())}};
  return check_probes(probes, [&] { return boundary_hd_loss(p.probs, p.onehot, maps).value; }, rng, opt);
}

ProbeStats op_loss_fp(Rng& rng, const GradcheckOptions& opt) {
  LossProblem p = loss_problem(rng);
  std::vector<Probe> probes{{"probs", p.probs.value(), copy_of(fp_regularizer(p.probs, p.onehot, 0.1).grad.value())}};
  return check_probes(probes, [&] { return fp_regularizer(p.probs, p.onehot, 0.1).value; }, rng, opt);
}

ProbeStats op_loss_composite(Rng& rng, const GradcheckOptions& opt) {
  LossProblem p = loss_problem(rng);
  LossConfig cfg;
  cfg.spacing = random_spacing(rng);
  const BoundaryMaps maps = boundary_weights(p.probs, p.onehot, cfg.spacing, cfg.hd_beta);
  std::vector<Probe> probes{
      {"logits", p.logits.value(), copy_of(composite_loss(p.logits, p.labels, cfg, maps).grad_logits.value())}};
  return check_probes(probes, [&] { return composite_loss(p.logits, p.labels, cfg, maps).total; }, rng, opt);
}

using OpFn = ProbeStats (*)(Rng&, const GradcheckOptions&);

struct OpEntry {
  const char* name;
  OpFn fn;
  double tolerance;
};

const std::vector<OpEntry>& registry() {
  static const std::vector<OpEntry> ops{
      {"conv_standard", op_conv_standard, kOpTolerance},
      {"conv_standard_stride2", op_conv_stride2, kOpTolerance},
      {"conv_depthwise", op_conv_depthwise, kOpTolerance},
      {"conv_pointwise", op_conv_pointwise, kOpTolerance},
      {"conv_transposed", op_conv_transposed, kOpTolerance},
      {"instance_norm", op_instance_norm, kOpTolerance},
      {"leaky_relu", op_leaky_relu, kOpTolerance},
      {"se_attention", op_se, kOpTolerance},
      {"drop_path_train", op_drop_path_train, kOpTolerance},
      {"drop_path_infer", op_drop_path_infer, kOpTolerance},
      {"residual_se_block", op_residual_infer, kOpTolerance},
      {"residual_se_block_train", op_residual_train, kOpTolerance},
      {"depthwise_separable_block", op_separable, kOpTolerance},
      {"toy_unet", op_toy_unet, kOpTolerance},
      {"loss_soft_dice", op_loss_dice, kLossTolerance},
      {"loss_cross_entropy", op_loss_ce, kLossTolerance},
      {"loss_boundary_hd", op_loss_hd, kLossTolerance},
      {"loss_fp_regularizer", op_loss_fp, kLossTolerance},
      {"loss_composite", op_loss_composite, kLossTolerance},
  };
  return ops;
}

}  // namespace

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> names;
  for (const auto& e : registry()) names.emplace_back(e.name);
  return names;
}

OpCheck run_gradcheck_op(const std::string& op, const GradcheckOptions& opt) {
  const auto& ops = registry();
  const auto it = std::find_if(ops.begin(), ops.end(), [&](const OpEntry& e) { return op == e.name; });
  if (it == ops.end()) fail(Errc::InvalidArgument, "unknown gradcheck op '" + op + "'");
  if (opt.seeds < 1) fail(Errc::InvalidArgument, "gradcheck needs at least one seed");
  OpCheck check{op, it->tolerance, opt.seeds, {}};
  for (int s = 0; s < opt.seeds; ++s) {
    Rng rng(opt.base_seed * 1000003ULL + static_cast<std::uint64_t>(s));
    check.stats.merge(it->fn(rng, opt));
  }
  return check;
}

bool GradcheckReport::pass() const {
  return !ops.empty() && std::all_of(ops.begin(), ops.end(), [](const OpCheck& c) { return c.pass(); });
}

GradcheckReport run_gradcheck_suite(const GradcheckOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  GradcheckReport r;
  for (const auto& name : gradcheck_ops()) r.ops.push_back(run_gradcheck_op(name, opt));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

nlohmann::json to_json(const GradcheckReport& r) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& c : r.ops) {
    ops.push_back({{"op", c.op},
                   {"max_rel_error", c.stats.max_rel_error},
                   {"tolerance", c.tolerance},
                   {"seeds", c.seeds},
                   {"coordinates", c.stats.coordinates},
                   {"kink_retries", c.stats.kink_retries},
                   {"kink_skipped", c.stats.kink_skipped},
                   {"pass", c.pass()}});
  }
  return {{"ops", ops}, {"seconds", r.seconds}, {"pass", r.pass()}};
}

}  // namespace pedseg::nn
