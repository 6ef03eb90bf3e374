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

#include "pedseg/toy_net.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "pedseg/config.hpp"
#include "pedseg/error.hpp"
#include "pedseg/init.hpp"

namespace pedseg::nn {

CountConfig ToyNetConfig::count_config() const {
  CountConfig c;
  c.widen_encoder = widen_encoder;
  c.residual_se = residual_se;
  c.separable = false;
  c.in_channels = in_channels;
  c.num_classes = num_classes;
  c.kernel = block.kernel;
  c.residual_blocks = 1;
  c.se_reduction = block.se_reduction;
  c.se_bias = true;
  return c;
}

struct EncoderStage {
  ConvNormAct stem;
  std::optional<ResidualSEBlock> block;
  std::optional<ConvNormAct> plain;
};

struct DecoderStage {
  Conv3d up;
  ConvNormAct conv1, conv2;
  int up_channels = 0;
};

struct ToyUNet::Impl {
  std::vector<EncoderStage> enc;
  std::vector<DecoderStage> dec;
  Conv3d head;
};

ToyUNet::ToyUNet(const ToyNetConfig& cfg) : cfg_(cfg), impl_(std::make_unique<Impl>()) {
  const ChannelPlan plan = cfg.plan();
  const auto& dec = plan.decoder_channels();
  const std::vector<int>& enc = cfg.widen_encoder ? plan.encoder_channels() : dec;
  const std::size_t L = plan.stages();
  const BlockConfig& b = cfg.block;
  for (std::size_t i = 0; i < L; ++i) {
    const std::string name = "enc" + std::to_string(i);
    const int c_prev = i == 0 ? cfg.in_channels : enc[i - 1];
    EncoderStage s{ConvNormAct(name + ".stem", ConvSpec::standard(b.kernel, c_prev, enc[i], i == 0 ? 1 : 2), b.eps,
                               b.slope),
                   std::nullopt, std::nullopt};
    if (cfg.residual_se) s.block.emplace(name + ".block", enc[i], b);
    else s.plain.emplace(name + ".conv", ConvSpec::standard(b.kernel, enc[i], enc[i]), b.eps, b.slope);
    impl_->enc.push_back(std::move(s));
  }
  for (std::size_t i = 0; i + 1 < L; ++i) {
    const std::string name = "dec" + std::to_string(i);
    const int below = i + 2 == L ? enc[i + 1] : dec[i + 1];
    impl_->dec.push_back(DecoderStage{
        Conv3d(name + ".up", ConvSpec::transposed(2, 2, below, dec[i])),
        ConvNormAct(name + ".conv1", ConvSpec::standard(b.kernel, dec[i] + enc[i], dec[i]), b.eps, b.slope),
        ConvNormAct(name + ".conv2", ConvSpec::standard(b.kernel, dec[i], dec[i]), b.eps, b.slope), dec[i]});
  }
  impl_->head = Conv3d("head", ConvSpec::pointwise(L == 1 ? enc[0] : dec[0], cfg.num_classes, true));
}

ToyUNet::~ToyUNet() = default;
ToyUNet::ToyUNet(ToyUNet&&) noexcept = default;
ToyUNet& ToyUNet::operator=(ToyUNet&&) noexcept = default;

Tensor5 ToyUNet::forward(const Tensor5& x, Mode mode, Rng& rng) {
  auto& m = *impl_;
  std::vector<Tensor5> skips;
  Tensor5 t = x;
  for (auto& s : m.enc) {
    t = s.stem.forward(t);
    t = s.block ? s.block->forward(t, mode, rng) : s.plain->forward(t);
    skips.push_back(t);
  }
  Tensor5 u = std::move(skips.back());
  for (std::size_t i = m.dec.size(); i-- > 0;) {
    const Shape5& ss = skips[i].shape();
    Tensor5 up = m.dec[i].up.forward(u, Spatial3{ss.d, ss.h, ss.w});
    u = m.dec[i].conv2.forward(m.dec[i].conv1.forward(concat_channels(up, skips[i])));
  }
  return m.head.forward(u);
}

Tensor5 ToyUNet::backward(const Tensor5& grad_logits) {
  auto& m = *impl_;
  Tensor5 g = m.head.backward(grad_logits);
  std::vector<std::optional<Tensor5>> skip_grads(m.enc.size());
  for (std::size_t i = 0; i < m.dec.size(); ++i) {
    g = m.dec[i].conv1.backward(m.dec[i].conv2.backward(g));
    auto [g_up, g_skip] = split_channels(g, m.dec[i].up_channels);
    skip_grads[i] = std::move(g_skip);
    g = m.dec[i].up.backward(g_up);
  }
  for (std::size_t i = m.enc.size(); i-- > 0;) {
    if (skip_grads[i]) g = add(g, *skip_grads[i]);
    auto& s = m.enc[i];
    g = s.block ? s.block->backward(g) : s.plain->backward(g);
    g = s.stem.backward(g);
  }
  return g;
}

std::vector<Param*> ToyUNet::params() {
  auto& m = *impl_;
  std::vector<Param*> out;
  auto take = [&](std::vector<Param*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (auto& s : m.enc) {
    take(s.stem.params());
    take(s.block ? s.block->params() : s.plain->params());
  }
  for (auto& d : m.dec) {
    take(d.up.params());
    take(d.conv1.params());
    take(d.conv2.params());
  }
  take(m.head.params());
  return out;
}

namespace {

struct Sphere {
  double cx, cy, cz, r;
  bool contains(int x, int y, int z) const {
    const double dx = x - cx, dy = y - cy, dz = z - cz;
    return dx * dx + dy * dy + dz * dz <= r * r;
  }
};

Sphere random_sphere(int size, double r_min, double r_max, Rng& rng) {
  std::uniform_real_distribution<double> radius(r_min, r_max);
  const double r = radius(rng);
  const double lo = std::min(r, 0.5 * (size - 1)), hi = std::max(size - 1 - r, 0.5 * (size - 1));
  std::uniform_real_distribution<double> centre(lo, hi);
  const double cx = centre(rng), cy = centre(rng), cz = centre(rng);
  return {cx, cy, cz, r};
}

void check_task(int size, int batch) {
  if (size < 4 || batch < 1) fail(Errc::InvalidArgument, "task volumes need size >= 4 and batch >= 1");
}

}  // namespace

Batch make_blob_batch(const BlobTaskConfig& cfg, Rng& rng) {
  check_task(cfg.size, cfg.batch);
  const int n = cfg.size;
  const Shape5 s{cfg.batch, 1, n, n, n};
  Batch b{Tensor5(s), LabelTensor(s, std::vector<int>(s.numel(), 0))};
  std::normal_distribution<double> noise(0.0, cfg.noise);
  for (int k = 0; k < cfg.batch; ++k) {
    const Sphere sp = random_sphere(n, cfg.radius_min, cfg.radius_max, rng);
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const bool in = sp.contains(x, y, z);
          const std::size_t off = b.image.offset(k, 0, z, y, x);
          b.image.value()[off] = (in ? 1.0 : 0.0) + noise(rng);
          b.labels.labels[off] = in ? 1 : 0;
        }
  }
  return b;
}

Batch make_absent_class_batch(const AbsentClassTaskConfig& cfg, Rng& rng, bool force_absent) {
  check_task(cfg.size, cfg.batch);
  const int n = cfg.size;
  const Shape5 s{cfg.batch, 1, n, n, n};
  Batch b{Tensor5(s), LabelTensor(s, std::vector<int>(s.numel(), 0))};
  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::bernoulli_distribution has_b(cfg.b_probability);
  std::bernoulli_distribution has_decoy(cfg.decoy_probability);
  for (int k = 0; k < cfg.batch; ++k) {
    const Sphere a = random_sphere(n, cfg.radius_min, cfg.radius_max, rng);
    const bool b_present = has_b(rng) && !force_absent;
    const bool dim_sphere = b_present || has_decoy(rng);
    std::optional<Sphere> sb;
    // B may clip the volume edge; it only has to stay clear of A.
    std::uniform_real_distribution<double> radius(cfg.radius_min, cfg.radius_max), centre(0.0, n - 1.0);
    for (int attempt = 0; dim_sphere && attempt < 64 && !sb; ++attempt) {
      const Sphere c{centre(rng), centre(rng), centre(rng), radius(rng)};
      const double d = std::hypot(c.cx - a.cx, c.cy - a.cy, c.cz - a.cz);
      if (d > a.r + c.r + 0.5) sb = c;
    }
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const std::size_t off = b.image.offset(k, 0, z, y, x);
          int label = 0;
          double v = 0.0;
          if (a.contains(x, y, z)) label = 1, v = cfg.intensity_a;
          else if (sb && sb->contains(x, y, z)) label = b_present ? 2 : 0, v = cfg.intensity_b;
          b.image.value()[off] = v + noise(rng);
          b.labels.labels[off] = label;
        }
  }
  return b;
}

namespace {

struct Overlap {
  double tp = 0, fp = 0, fn = 0;
  void add(const Tensor5& logits, const LabelTensor& labels, int cls) {
    const Shape5& s = logits.shape();
    const std::size_t m = s.spatial();
    for (int n = 0; n < s.n; ++n) {
      for (std::size_t v = 0; v < m; ++v) {
        int best = 0;
        for (int c = 1; c < s.c; ++c) {
          if (logits.plane(n, c)[v] > logits.plane(n, best)[v]) best = c;
        }
        const bool pred = best == cls;
        const bool truth = labels.labels[static_cast<std::size_t>(n) * m + v] == cls;
        tp += pred && truth;
        fp += pred && !truth;
        fn += !pred && truth;
      }
    }
  }
  double dice() const { return tp + fp + fn == 0 ? 1.0 : 2 * tp / (2 * tp + fp + fn); }
};

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

enum Stream : std::uint64_t { kInit = 1, kData = 2, kDrop = 3, kHeldout = 4 };

}  // namespace

double hard_dice(const Tensor5& logits, const LabelTensor& labels, int cls) {
  Overlap o;
  o.add(logits, labels, cls);
  return o.dice();
}

TrainConfig TrainConfig::from(const KeyValueConfig& cfg) {
  TrainConfig c;
  c.steps = static_cast<int>(cfg.get_int("train.steps", c.steps));
  c.alpha = cfg.get_double("train.alpha", c.alpha);
  c.eval_cases = static_cast<int>(cfg.get_int("train.eval_cases", c.eval_cases));
  c.task.size = static_cast<int>(cfg.get_int("train.size", c.task.size));
  c.task.batch = static_cast<int>(cfg.get_int("train.batch", c.task.batch));
  c.task.noise = cfg.get_double("train.noise", c.task.noise);
  c.net.block.drop_path = cfg.get_double("train.drop_path", c.net.block.drop_path);
  c.loss = LossConfig::from(cfg);
  c.optim = OptimizerConfig::from(cfg, c.optim);
  if (c.steps < 1 || c.eval_cases < 1) fail(Errc::ConfigError, "train.steps and train.eval_cases must be positive");
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps},
          {"alpha", alpha},
          {"seed", seed},
          {"eval_cases", eval_cases},
          {"decoder_channels", net.decoder_channels},
          {"drop_path", net.block.drop_path},
          {"size", task.size},
          {"batch", task.batch},
          {"noise", task.noise},
          {"loss", loss.to_json()},
          {"optim", optim.to_json()}};
}

nlohmann::json to_json(const StepLog& s) {
  return {{"epoch", s.step}, {"lr", s.lr},   {"loss", s.loss}, {"dice_term", s.dice_term},
          {"ce", s.ce},      {"hd", s.hd},   {"fp", s.fp},     {"train_dice", s.train_dice}};
}

TrainResult train_smoke(const TrainConfig& cfg, const std::function<void(const StepLog&)>& on_step) {
  ToyUNet net(cfg.net);
  const auto params = net.params();
  Rng init_rng(mix(cfg.seed, kInit)), data_rng(mix(cfg.seed, kData)), drop_rng(mix(cfg.seed, kDrop));
  gaussian_init(params, cfg.alpha, init_rng);
  OptimizerConfig oc = cfg.optim;
  oc.horizon = cfg.steps;
  OptimizerState opt(oc);

  TrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    const Batch b = make_blob_batch(cfg.task, data_rng);
    zero_grads(params);
    const Tensor5 logits = net.forward(b.image, Mode::Train, drop_rng);
    const LossBreakdown lb = composite_loss(logits, b.labels, cfg.loss);
    net.backward(lb.grad_logits);
    StepLog log{step, opt.learning_rate(), lb.total, lb.dice, lb.ce, lb.hd, lb.fp, hard_dice(logits, b.labels, 1)};
    opt.step(params);
    if (on_step) on_step(log);
    result.log.push_back(log);
  }

  Rng heldout(mix(cfg.seed, kHeldout));
  BlobTaskConfig eval_task = cfg.task;
  eval_task.batch = 1;
  Overlap o;
  for (int k = 0; k < cfg.eval_cases; ++k) {
    const Batch b = make_blob_batch(eval_task, heldout);
    o.add(net.forward(b.image, Mode::Infer, drop_rng), b.labels, 1);
  }
  result.heldout_dice = o.dice();
  return result;
}

namespace {

double absent_class_mass(const FpExperimentConfig& cfg, std::uint64_t seed, double theta) {
  ToyNetConfig nc;
  nc.decoder_channels = cfg.decoder_channels;
  nc.num_classes = 3;
  ToyUNet net(nc);
  const auto params = net.params();
  Rng init_rng(mix(seed, kInit)), data_rng(mix(seed, kData)), drop_rng(mix(seed, kDrop));
  gaussian_init(params, cfg.alpha, init_rng);
  OptimizerConfig oc = cfg.optim;
  oc.horizon = cfg.steps;
  OptimizerState opt(oc);
  LossConfig lc;
  lc.theta = theta;
  for (int step = 0; step < cfg.steps; ++step) {
    const Batch b = make_absent_class_batch(cfg.task, data_rng);
    zero_grads(params);
    const Tensor5 logits = net.forward(b.image, Mode::Train, drop_rng);
    net.backward(composite_loss(logits, b.labels, lc).grad_logits);
    opt.step(params);
  }
  Rng heldout(mix(seed, kHeldout));
  AbsentClassTaskConfig eval_task = cfg.task;
  eval_task.batch = 1;
  double mass = 0.0;
  for (int k = 0; k < cfg.eval_cases; ++k) {
    const Batch b = make_absent_class_batch(eval_task, heldout, true);
    const Tensor5 p = softmax(net.forward(b.image, Mode::Infer, drop_rng));
    for (double v : p.plane(0, 2)) mass += v;
  }
  return mass / cfg.eval_cases;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

FpExperimentConfig FpExperimentConfig::from(const KeyValueConfig& cfg) {
  FpExperimentConfig c;
  c.seeds = static_cast<int>(cfg.get_int("fp.seeds", c.seeds));
  c.base_seed = static_cast<std::uint64_t>(cfg.get_int("fp.base_seed", static_cast<long long>(c.base_seed)));
  c.steps = static_cast<int>(cfg.get_int("fp.steps", c.steps));
  c.eval_cases = static_cast<int>(cfg.get_int("fp.eval_cases", c.eval_cases));
  c.theta = cfg.get_double("fp.theta", c.theta);
  c.alpha = cfg.get_double("fp.alpha", c.alpha);
  c.task.batch = static_cast<int>(cfg.get_int("fp.batch", c.task.batch));
  c.task.noise = cfg.get_double("fp.noise", c.task.noise);
  c.task.intensity_b = cfg.get_double("fp.intensity_b", c.task.intensity_b);
  c.task.b_probability = cfg.get_double("fp.b_probability", c.task.b_probability);
  c.task.decoy_probability = cfg.get_double("fp.decoy_probability", c.task.decoy_probability);
  c.optim = OptimizerConfig::from(cfg, c.optim);
  if (c.seeds < 1 || c.steps < 1 || c.eval_cases < 1 || c.task.batch < 1) {
    fail(Errc::ConfigError, "fp.seeds, fp.steps, fp.eval_cases and fp.batch must be positive");
  }
  if (!(c.theta > 0.0)) fail(Errc::ConfigError, "fp.theta must be positive");
  return c;
}

nlohmann::json FpExperimentConfig::to_json() const {
  return {{"seeds", seeds},
          {"base_seed", base_seed},
          {"steps", steps},
          {"eval_cases", eval_cases},
          {"theta", theta},
          {"alpha", alpha},
          {"decoder_channels", decoder_channels},
          {"batch", task.batch},
          {"noise", task.noise},
          {"intensity_a", task.intensity_a},
          {"intensity_b", task.intensity_b},
          {"b_probability", task.b_probability},
          {"decoy_probability", task.decoy_probability},
          {"optim", optim.to_json()}};
}

FpExperimentResult run_fp_experiment(const FpExperimentConfig& cfg) {
  if (cfg.seeds < 1 || cfg.steps < 1 || cfg.eval_cases < 1) fail(Errc::InvalidArgument, "experiment sizes must be positive");
  FpExperimentResult r;
  for (int k = 0; k < cfg.seeds; ++k) {
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(k);
    const double with = absent_class_mass(cfg, seed, cfg.theta);
    const double without = absent_class_mass(cfg, seed, 0.0);
    r.mass_theta.push_back(with);
    r.mass_zero.push_back(without);
    r.reduction.push_back(without > 0 ? 1.0 - with / without : 0.0);
  }
  r.median_reduction = median(r.reduction);
  r.median_mass_theta = median(r.mass_theta);
  r.median_mass_zero = median(r.mass_zero);
  return r;
}

nlohmann::json to_json(const FpExperimentResult& r) {
  return {{"mass_theta", r.mass_theta},           {"mass_zero", r.mass_zero},
          {"reduction", r.reduction},             {"median_reduction", r.median_reduction},
          {"median_mass_theta", r.median_mass_theta}, {"median_mass_zero", r.median_mass_zero}};
}

}  // namespace pedseg::nn
