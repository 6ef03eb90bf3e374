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

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pedseg/augment.hpp"
#include "pedseg/config.hpp"
#include "pedseg/error.hpp"
#include "pedseg/gradcheck.hpp"
#include "pedseg/metrics.hpp"
#include "pedseg/nifti.hpp"
#include "pedseg/optim.hpp"
#include "pedseg/params.hpp"
#include "pedseg/postprocess.hpp"
#include "pedseg/simd/kernels.hpp"
#include "pedseg/toy_net.hpp"
#include "pedseg/volume.hpp"

#ifndef PEDSEG_VERSION
#define PEDSEG_VERSION "0.0.0"
#endif

namespace pedseg::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Thrown when a run completed but one of its checks did not hold.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything needed to rerun a subcommand. This is what a manifest stores.
struct Invocation {
  std::string subcommand;
  std::map<std::string, std::string> args;
  std::map<std::string, std::string> config;
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  fs::path out = "pedseg_out";
};

struct RunContext {
  const Invocation& inv;
  KeyValueConfig cfg;
  std::ostream& out;
  json resolved = json::object();
  std::vector<std::string> outputs;

  fs::path output(const std::string& name) {
    outputs.push_back(name);
    return inv.out / name;
  }
  const std::string& arg(const std::string& key) const {
    const auto it = inv.args.find(key);
    if (it == inv.args.end() || it->second.empty()) fail(Errc::InvalidArgument, "missing --" + key);
    return it->second;
  }
  std::string arg_or(const std::string& key, const std::string& fallback) const {
    const auto it = inv.args.find(key);
    return it == inv.args.end() || it->second.empty() ? fallback : it->second;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(Errc::IoError, "cannot write " + path.string());
  f << text;
  if (!f) fail(Errc::IoError, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json read_json(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::IoError, "cannot read " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    fail(Errc::InvalidArgument, path.string() + ": " + e.what());
  }
}

LabelScheme scheme_from(const KeyValueConfig& cfg) {
  LabelScheme s;
  auto code = [&](const char* key, std::uint8_t fallback) {
    const long long v = cfg.get_int(std::string("labels.") + key, fallback);
    if (v < 1 || v > 255) fail(Errc::ConfigError, std::string("labels.") + key + " must be in 1..255");
    return static_cast<std::uint8_t>(v);
  };
  s.et = code("et", s.et);
  s.net = code("net", s.net);
  s.cc = code("cc", s.cc);
  s.ed = code("ed", s.ed);
  return s;
}

json to_json(const LabelScheme& s) { return {{"et", s.et}, {"net", s.net}, {"cc", s.cc}, {"ed", s.ed}}; }

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
  std::string body = text;
  body.erase(std::remove_if(body.begin(), body.end(), [](char c) { return c == '[' || c == ']' || c == ' '; }),
             body.end());
  std::vector<int> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double v = parse_double(item, key);
    if (v != std::floor(v) || v < 1 || v > 1 << 20) fail(Errc::ConfigError, key + " must list positive integers");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) fail(Errc::ConfigError, key + " is empty");
  return out;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first failure in
/// index order is rethrown after every worker has stopped.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------- cases

void require_same_grid(const nifti::Image& a, const nifti::Image& b, const std::string& what) {
  const auto& da = a.header.dim;
  const auto& db = b.header.dim;
  if (!std::equal(da.begin() + 1, da.begin() + 4, db.begin() + 1)) {
    fail(Errc::DimsMismatch, "dims mismatch: " + what);
  }
}

struct CohortFiles {
  std::string t1 = "t1.nii.gz";
  std::string t1ce = "t1ce.nii.gz";
  std::string seg = "seg.nii.gz";
};

CohortFiles cohort_files(const KeyValueConfig& cfg) {
  CohortFiles f;
  f.t1 = cfg.raw("cohort.t1").value_or(f.t1);
  f.t1ce = cfg.raw("cohort.t1ce").value_or(f.t1ce);
  f.seg = cfg.raw("cohort.seg").value_or(f.seg);
  return f;
}

/// Case directories, one per line; blank lines and # comments are skipped and
/// relative entries resolve against the manifest's directory. Sorted so
/// aggregation order does not depend on the listing.
std::vector<fs::path> read_cohort(const fs::path& manifest) {
  std::ifstream f(manifest);
  if (!f) fail(Errc::IoError, "cannot read cohort manifest " + manifest.string());
  std::vector<fs::path> cases;
  std::string line;
  while (std::getline(f, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    fs::path p = line.substr(b, e - b + 1);
    if (p.is_relative()) p = manifest.parent_path() / p;
    cases.push_back(p.lexically_normal());
  }
  if (cases.empty()) fail(Errc::InvalidArgument, "empty cohort: " + manifest.string());
  std::sort(cases.begin(), cases.end());
  return cases;
}

struct CaseRatios {
  std::vector<double> net;
  std::vector<double> et;
};

CaseRatios load_case_ratios(const fs::path& dir, const CohortFiles& files, const PostprocessConfig& pp) {
  try {
    const auto t1 = nifti::read_file(dir / files.t1);
    const auto t1ce = nifti::read_file(dir / files.t1ce);
    const auto seg = nifti::read_file(dir / files.seg);
    require_same_grid(seg, t1ce, files.seg + " vs " + files.t1ce);
    require_same_grid(seg, t1, files.seg + " vs " + files.t1);
    const auto labels = nifti::to_label_volume(seg);
    VoxelGrid a = nifti::to_voxel_grid(t1ce);
    VoxelGrid b = nifti::to_voxel_grid(t1);
    if (pp.normalize_inputs) {
      a = zscore_normalize(a, pp.normalize_region);
      b = zscore_normalize(b, pp.normalize_region);
    }
    const RatioMap ratio = t1ce_t1_ratio(a, b, pp.ratio_guard);
    return {in_band_ratios(ratio, labels, pp.scheme.net, pp.thresholds),
            in_band_ratios(ratio, labels, pp.scheme.et, pp.thresholds)};
  } catch (const Error& e) {
    throw Error(e.code(), "case " + dir.string() + ": " + e.what());
  }
}

struct Cohort {
  std::vector<fs::path> cases;
  std::vector<CaseRatios> ratios;
};

Cohort load_cohort(RunContext& ctx, const PostprocessConfig& pp) {
  Cohort c;
  c.cases = read_cohort(ctx.arg("cohort"));
  c.ratios.resize(c.cases.size());
  const CohortFiles files = cohort_files(ctx.cfg);
  ctx.resolved["cohort_files"] = {{"t1", files.t1}, {"t1ce", files.t1ce}, {"seg", files.seg}};
  parallel_for(c.cases.size(), ctx.inv.jobs,
               [&](std::size_t i) { c.ratios[i] = load_case_ratios(c.cases[i], files, pp); });
  return c;
}

PostprocessConfig postprocess_config(RunContext& ctx) {
  PostprocessConfig pp = PostprocessConfig::from(ctx.cfg);
  pp.scheme = scheme_from(ctx.cfg);
  ctx.resolved["postprocess"] = pp.to_json();
  ctx.resolved["labels"] = to_json(pp.scheme);
  return pp;
}

// ---------------------------------------------------------------- commands

void cmd_postprocess(RunContext& ctx) {
  const PostprocessConfig pp = postprocess_config(ctx);
  const auto seg = nifti::read_file(ctx.arg("seg"));
  const auto t1ce = nifti::read_file(ctx.arg("t1ce"));
  const auto t1 = nifti::read_file(ctx.arg("t1"));
  require_same_grid(seg, t1ce, "seg vs t1ce");
  require_same_grid(seg, t1, "seg vs t1");
  const auto labels = nifti::to_label_volume(seg);
  const auto result = postprocess_pipeline(labels, nifti::to_voxel_grid(t1ce), nifti::to_voxel_grid(t1), pp);

  // The input header is kept so an untouched segmentation is written back
  // byte for byte.
  nifti::Image out = seg;
  out.data.assign(result.labels.data().begin(), result.labels.data().end());
  nifti::write_file(ctx.output(ctx.arg_or("output", "seg_postprocessed.nii.gz")), out);

  json report = to_json(result);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) changed += labels[i] != result.labels[i];
  report["voxels_changed"] = changed;
  write_json(ctx.output("postprocess_report.json"), report);
  ctx.out << report.dump(2) << "\n";
}

void cmd_metrics(RunContext& ctx) {
  const LabelScheme scheme = scheme_from(ctx.cfg);
  LesionMatchConfig mc;
  mc.gt_dilation_iterations = static_cast<int>(ctx.cfg.get_int("metrics.dilation", mc.gt_dilation_iterations));
  mc.min_gt_lesion_voxels = static_cast<std::size_t>(
      ctx.cfg.get_int("metrics.min_lesion_voxels", static_cast<long long>(mc.min_gt_lesion_voxels)));
  mc.nsd_tolerance_mm = ctx.cfg.get_double("metrics.nsd_tolerance_mm", mc.nsd_tolerance_mm);
  if (mc.gt_dilation_iterations < 0 || !(mc.nsd_tolerance_mm >= 0.0)) {
    fail(Errc::ConfigError, "metrics.dilation and metrics.nsd_tolerance_mm must be nonnegative");
  }
  ctx.resolved["labels"] = to_json(scheme);
  ctx.resolved["metrics"] = {{"dilation", mc.gt_dilation_iterations},
                             {"min_lesion_voxels", mc.min_gt_lesion_voxels},
                             {"nsd_tolerance_mm", mc.nsd_tolerance_mm}};

  const auto pred = nifti::read_file(ctx.arg("pred"));
  const auto gt = nifti::read_file(ctx.arg("gt"));
  require_same_grid(pred, gt, "pred vs gt");
  const auto report = evaluate_case(nifti::to_label_volume(pred), nifti::to_label_volume(gt), scheme, mc);
  const json j = to_json(report);
  write_json(ctx.output("metrics.json"), j);
  ctx.out << j.dump(2) << "\n";
}

void cmd_ratio_stats(RunContext& ctx) {
  const PostprocessConfig pp = postprocess_config(ctx);
  const Cohort cohort = load_cohort(ctx, pp);
  std::vector<double> net, et;
  std::string csv = "case,net_samples,et_samples\n";
  json cases = json::array();
  for (std::size_t i = 0; i < cohort.cases.size(); ++i) {
    const auto& r = cohort.ratios[i];
    net.insert(net.end(), r.net.begin(), r.net.end());
    et.insert(et.end(), r.et.begin(), r.et.end());
    csv += cohort.cases[i].string() + "," + std::to_string(r.net.size()) + "," + std::to_string(r.et.size()) + "\n";
    cases.push_back({{"case", cohort.cases[i].string()}, {"net_samples", r.net.size()}, {"et_samples", r.et.size()}});
  }
  const RatioStatistics st = ratio_statistics(net, et, pp.percentiles);
  const json j = {{"upper", st.upper},
                  {"lower", st.lower},
                  {"net_samples", st.net_samples},
                  {"et_samples", st.et_samples},
                  {"percentile_upper", pp.percentiles.net_upper},
                  {"percentile_lower", pp.percentiles.et_lower},
                  {"cases", cases}};
  write_text(ctx.output("ratio_stats.csv"), csv);
  write_json(ctx.output("ratio_stats.json"), j);
  ctx.out << "upper " << format_double(st.upper) << " (NET p" << pp.percentiles.net_upper << ", n=" << st.net_samples
          << ")\nlower " << format_double(st.lower) << " (ET p" << pp.percentiles.et_lower << ", n=" << st.et_samples
          << ")\n";
}

void cmd_roc(RunContext& ctx) {
  const PostprocessConfig pp = postprocess_config(ctx);
  const Cohort cohort = load_cohort(ctx, pp);
  std::vector<ScoredSample> samples;
  std::size_t positives = 0;
  for (const auto& r : cohort.ratios) {
    for (double v : r.net) samples.push_back({v, false});
    for (double v : r.et) samples.push_back({v, true});
    positives += r.et.size();
  }
  const RocCurve curve = roc_curve(samples);
  write_text(ctx.output("roc.csv"), roc_csv(curve));
  const json j = {{"auc", curve.auc},
                  {"points", curve.points.size()},
                  {"positives", positives},
                  {"negatives", samples.size() - positives},
                  {"cases", cohort.cases.size()}};
  write_json(ctx.output("roc.json"), j);
  ctx.out << "auc " << format_double(curve.auc) << "\n";
}

void cmd_gradcheck(RunContext& ctx) {
  nn::GradcheckOptions opt;
  opt.seeds = static_cast<int>(ctx.cfg.get_int("gradcheck.seeds", opt.seeds));
  opt.samples_per_array = static_cast<int>(ctx.cfg.get_int("gradcheck.samples", opt.samples_per_array));
  opt.h = ctx.cfg.get_double("gradcheck.h", opt.h);
  opt.base_seed = ctx.inv.seed;
  if (opt.seeds < 1 || opt.samples_per_array < 1 || !(opt.h > 0.0)) {
    fail(Errc::ConfigError, "gradcheck.seeds, gradcheck.samples and gradcheck.h must be positive");
  }
  ctx.resolved["gradcheck"] = {
      {"seeds", opt.seeds}, {"samples", opt.samples_per_array}, {"h", opt.h}, {"base_seed", opt.base_seed}};

  nn::GradcheckReport report;
  const std::string only = ctx.arg_or("op", "");
  if (only.empty()) {
    report = nn::run_gradcheck_suite(opt);
  } else {
    const auto names = nn::gradcheck_ops();
    std::stringstream ss(only);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        fail(Errc::InvalidArgument, "unknown op '" + name + "'");
      }
      report.ops.push_back(nn::run_gradcheck_op(name, opt));
    }
  }
  json j = nn::to_json(report);
  j.erase("seconds");  // timing lives in the manifest
  write_json(ctx.output("gradcheck.json"), j);
  for (const auto& c : report.ops) {
    ctx.out << (c.pass() ? "ok   " : "FAIL ") << c.op << " " << format_double(c.stats.max_rel_error) << "\n";
  }
  std::string failing;
  for (const auto& c : report.ops) {
    if (!c.pass()) failing += (failing.empty() ? "" : ",") + c.op;
  }
  if (!failing.empty()) throw CheckFailure("gradient check failed: " + failing);
}

void cmd_paramcount(RunContext& ctx) {
  nn::ChannelPlan plan = nn::ChannelPlan::nnunet_default();
  if (const auto d = ctx.cfg.raw("paramcount.decoder")) plan = nn::ChannelPlan::from_decoder(parse_int_list(*d, "paramcount.decoder"));
  const int k = std::stoi(ctx.arg_or("kernel", "3"));
  const int cin = std::stoi(ctx.arg_or("cin", "32"));
  const int cout = std::stoi(ctx.arg_or("cout", ctx.arg_or("cin", "32")));

  json presets = json::object();
  for (const char* name : {"baseline", "widened", "separable"}) {
    nn::CountConfig cc = nn::CountConfig::preset(name);
    cc.in_channels = static_cast<int>(ctx.cfg.get_int("paramcount.in_channels", cc.in_channels));
    cc.num_classes = static_cast<int>(ctx.cfg.get_int("paramcount.num_classes", cc.num_classes));
    const auto report = nn::count_parameters(plan, cc);
    presets[name] = nn::to_json(report);
    ctx.out << "== " << name << "\n" << nn::format_table(report) << "\n";
  }
  const json conv = {{"kernel", k},
                     {"cin", cin},
                     {"cout", cout},
                     {"standard", nn::standard_conv_params(k, cin, cout)},
                     {"separable", nn::separable_conv_params(k, cin, cout)}};
  ctx.out << "conv k=" << k << " cin=" << cin << " cout=" << cout << ": standard " << conv["standard"]
          << ", separable " << conv["separable"] << "\n";
  ctx.resolved["paramcount"] = {{"decoder", plan.decoder_channels()}, {"encoder", plan.encoder_channels()}};
  write_json(ctx.output("paramcount.json"), {{"presets", presets}, {"conv", conv}});
}

void cmd_schedule(RunContext& ctx) {
  const nn::OptimizerConfig oc = nn::OptimizerConfig::from(ctx.cfg);
  const long long step = std::stoll(ctx.arg_or("step", "1"));
  if (step < 1) fail(Errc::InvalidArgument, "--step must be positive");
  ctx.resolved["optim"] = oc.to_json();
  std::string csv = "t,lr\n";
  json rows = json::array();
  for (long long t = 0;; t = std::min(t + step, oc.horizon)) {
    const double lr = nn::cosine_lr(t, oc.horizon, oc.eta0);
    csv += std::to_string(t) + "," + format_double(lr) + "\n";
    rows.push_back({{"t", t}, {"lr", lr}});
    if (t == oc.horizon) break;
  }
  write_text(ctx.output("schedule.csv"), csv);
  write_json(ctx.output("schedule.json"), {{"eta0", oc.eta0}, {"horizon", oc.horizon}, {"rows", rows}});
  ctx.out << csv;
}

void cmd_train_smoke(RunContext& ctx) {
  nn::TrainConfig tc = nn::TrainConfig::from(ctx.cfg);
  tc.seed = ctx.inv.seed;
  const double min_dice = ctx.cfg.get_double("train.min_dice", 0.95);
  ctx.resolved["train"] = tc.to_json();
  ctx.resolved["train"]["min_dice"] = min_dice;

  std::ofstream log(ctx.output("train_log.jsonl"), std::ios::binary);
  if (!log) fail(Errc::IoError, "cannot write train_log.jsonl");
  const auto result = nn::train_smoke(tc, [&](const nn::StepLog& s) { log << nn::to_json(s).dump() << "\n"; });
  log.close();
  const json j = {{"heldout_dice", result.heldout_dice},
                  {"steps", tc.steps},
                  {"final_loss", result.log.empty() ? 0.0 : result.log.back().loss},
                  {"min_dice", min_dice},
                  {"pass", result.heldout_dice > min_dice}};
  write_json(ctx.output("train_result.json"), j);
  ctx.out << "held-out dice " << format_double(result.heldout_dice) << "\n";
  if (!(result.heldout_dice > min_dice)) throw CheckFailure("held-out dice below " + format_double(min_dice));
}

void cmd_fp_experiment(RunContext& ctx) {
  nn::FpExperimentConfig fc = nn::FpExperimentConfig::from(ctx.cfg);
  if (ctx.inv.seed_given) fc.base_seed = ctx.inv.seed;
  const double min_reduction = ctx.cfg.get_double("fp.min_reduction", 0.30);
  ctx.resolved["fp"] = fc.to_json();
  ctx.resolved["fp"]["min_reduction"] = min_reduction;
  const auto r = nn::run_fp_experiment(fc);
  bool strictly_lower = true;
  for (std::size_t i = 0; i < r.mass_theta.size(); ++i) strictly_lower &= r.mass_theta[i] < r.mass_zero[i];
  json j = nn::to_json(r);
  j["strictly_lower"] = strictly_lower;
  j["min_reduction"] = min_reduction;
  j["pass"] = strictly_lower && r.median_reduction >= min_reduction;
  write_json(ctx.output("fp_experiment.json"), j);
  ctx.out << "median mass theta=" << format_double(fc.theta) << " " << format_double(r.median_mass_theta)
          << ", theta=0 " << format_double(r.median_mass_zero) << ", median reduction "
          << format_double(r.median_reduction) << "\n";
  if (!j["pass"].get<bool>()) throw CheckFailure("false-positive reduction below target");
}

void cmd_augment(RunContext& ctx) {
  const augment::AugmentConfig ac = augment::AugmentConfig::from(ctx.cfg);
  ctx.resolved["augment"] = ac.to_json();
  const auto image = nifti::read_file(ctx.arg("image"));
  const auto seg = nifti::read_file(ctx.arg("seg"));
  require_same_grid(image, seg, "image vs seg");
  nn::Rng rng(ctx.inv.seed);
  const auto draw = augment::draw_augmentation(ac, rng);
  const auto res = augment::apply(nifti::to_voxel_grid(image), nifti::to_label_volume(seg), draw);
  nifti::write_file(ctx.output("image_aug.nii.gz"),
                    nifti::from_voxel_grid(res.image, nifti::Datatype::Float32, &image.header));
  nifti::write_file(ctx.output("seg_aug.nii.gz"), nifti::from_label_volume(res.labels, &seg.header));
}

/// JSONL training log to CSV plus a small SVG line chart.
void cmd_plot(RunContext& ctx) {
  std::ifstream f(ctx.arg("log"));
  if (!f) fail(Errc::IoError, "cannot read " + ctx.arg("log"));
  std::vector<std::string> columns;
  {
    std::stringstream ss(ctx.arg_or("columns", "loss,train_dice"));
    std::string c;
    while (std::getline(ss, c, ',')) columns.push_back(c);
  }
  std::vector<double> x;
  std::vector<std::vector<double>> y(columns.size());
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception&) {
      fail(Errc::InvalidArgument, "log line " + std::to_string(lineno) + " is not JSON");
    }
    if (!row.contains("epoch")) fail(Errc::InvalidArgument, "log line " + std::to_string(lineno) + " lacks epoch");
    x.push_back(row["epoch"].get<double>());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (!row.contains(columns[c]) || !row[columns[c]].is_number()) {
        fail(Errc::InvalidArgument, "log line " + std::to_string(lineno) + " lacks " + columns[c]);
      }
      y[c].push_back(row[columns[c]].get<double>());
    }
  }
  if (x.empty()) fail(Errc::InvalidArgument, "empty log");

  std::string csv = "epoch";
  for (const auto& c : columns) csv += "," + c;
  csv += "\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    csv += format_double(x[i]);
    for (const auto& col : y) csv += "," + format_double(col[i]);
    csv += "\n";
  }
  write_text(ctx.output("curve.csv"), csv);

  constexpr double W = 640, H = 360, M = 40;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  const double x0 = x.front(), x1 = std::max(x.back(), x0 + 1);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n";
  for (std::size_t c = 0; c < columns.size(); ++c) {
    // Each series is scaled to its own range; the legend gives the range.
    const auto [lo_it, hi_it] = std::minmax_element(y[c].begin(), y[c].end());
    const double lo = *lo_it, hi = *hi_it > lo ? *hi_it : lo + 1;
    svg << "<polyline fill=\"none\" stroke=\"" << kColors[c % 5] << "\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double px = M + (x[i] - x0) / (x1 - x0) * (W - 2 * M);
      const double py = H - M - (y[c][i] - lo) / (hi - lo) * (H - 2 * M);
      svg << (i ? " " : "") << px << "," << py;
    }
    svg << "\"/>\n<text x=\"" << M + 10 << "\" y=\"" << 20 + 14 * c << "\" font-size=\"12\" fill=\"" << kColors[c % 5]
        << "\">" << columns[c] << " [" << format_double(lo) << ", " << format_double(*hi_it) << "]</text>\n";
  }
  svg << "</svg>\n";
  write_text(ctx.output("curve.svg"), svg.str());
}

using Command = void (*)(RunContext&);

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"augment", cmd_augment},       {"fp-experiment", cmd_fp_experiment}, {"gradcheck", cmd_gradcheck},
      {"metrics", cmd_metrics},       {"paramcount", cmd_paramcount},       {"plot", cmd_plot},
      {"postprocess", cmd_postprocess}, {"ratio-stats", cmd_ratio_stats},   {"roc", cmd_roc},
      {"schedule", cmd_schedule},     {"train-smoke", cmd_train_smoke},
  };
  return table;
}

// ---------------------------------------------------------------- manifest

json invocation_json(const Invocation& inv) {
  return {{"subcommand", inv.subcommand}, {"args", inv.args},  {"config", inv.config},
          {"config_path", inv.config_path}, {"seed", inv.seed}, {"seed_given", inv.seed_given}, {"jobs", inv.jobs}};
}

Invocation invocation_from(const json& j) {
  Invocation inv;
  try {
    inv.subcommand = j.at("subcommand").get<std::string>();
    inv.args = j.at("args").get<std::map<std::string, std::string>>();
    inv.config = j.at("config").get<std::map<std::string, std::string>>();
    inv.config_path = j.value("config_path", "");
    inv.seed = j.at("seed").get<std::uint64_t>();
    inv.seed_given = j.value("seed_given", false);
    inv.jobs = j.value("jobs", 1);
  } catch (const json::exception& e) {
    fail(Errc::InvalidArgument, std::string("malformed manifest: ") + e.what());
  }
  if (!commands().count(inv.subcommand)) fail(Errc::InvalidArgument, "manifest names unknown subcommand");
  return inv;
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
  err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

struct Outcome {
  int exit_code = kExitOk;
  json manifest;
};

Outcome execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  KeyValueConfig cfg;
  for (const auto& [k, v] : inv.config) cfg.set(k, v);
  RunContext ctx{inv, cfg, out};
  std::optional<std::string> error;
  try {
    fs::create_directories(inv.out);
    commands().at(inv.subcommand)(ctx);
  } catch (const CheckFailure& e) {
    o.exit_code = kExitCheck;
    error = e.what();
    report_error(err, "CheckFailed", e.what());
  } catch (const Error& e) {
    o.exit_code = kExitInput;
    error = e.what();
    report_error(err, errc_name(e.code()), e.what());
  } catch (const fs::filesystem_error& e) {
    o.exit_code = kExitInput;
    error = e.what();
    report_error(err, errc_name(Errc::IoError), e.what());
  } catch (const std::exception& e) {
    o.exit_code = kExitInput;
    error = e.what();
    report_error(err, "InvalidArgument", e.what());
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json outputs = json::object();
  for (const auto& name : ctx.outputs) {
    if (fs::exists(inv.out / name)) outputs[name] = file_digest(inv.out / name);
  }
  o.manifest = {{"subcommand", inv.subcommand},
                {"invocation", invocation_json(inv)},
                {"resolved_config", ctx.resolved},
                {"inputs", inv.args},
                {"out_dir", inv.out.string()},
                {"outputs", outputs},
                {"seed", inv.seed},
                {"version", PEDSEG_VERSION},
                {"simd", std::string(simd::level_name(simd::active_level()))},
                {"wall_time_s", wall},
                {"exit_code", o.exit_code}};
  if (error) o.manifest["error"] = *error;
  std::error_code ec;
  if (fs::is_directory(inv.out, ec)) {
    try {
      write_json(inv.out / "manifest.json", o.manifest);
    } catch (const Error& e) {
      report_error(err, errc_name(e.code()), e.what());
      if (o.exit_code == kExitOk) o.exit_code = kExitInput;
    }
  }
  return o;
}

int replay(const fs::path& manifest_path, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  json original;
  Invocation inv;
  try {
    original = read_json(manifest_path);
    inv = invocation_from(original.at("invocation"));
  } catch (const Error& e) {
    report_error(err, errc_name(e.code()), e.what());
    return kExitInput;
  } catch (const json::exception& e) {
    report_error(err, "InvalidArgument", std::string("malformed manifest: ") + e.what());
    return kExitInput;
  }
  inv.out = out_dir;
  const Outcome o = execute(inv, out, err);
  if (o.exit_code != original.value("exit_code", kExitOk)) {
    report_error(err, "CheckFailed", "replay exit code differs from the recorded run");
    return kExitCheck;
  }
  std::string mismatched;
  const json recorded = original.value("outputs", json::object());
  const json& fresh = o.manifest.at("outputs");
  for (const auto& [name, digest] : recorded.items()) {
    const auto it = fresh.find(name);
    if (it == fresh.end() || *it != digest) mismatched += (mismatched.empty() ? "" : ",") + name;
  }
  if (!mismatched.empty()) {
    report_error(err, "CheckFailed", "replay outputs differ: " + mismatched);
    return kExitCheck;
  }
  out << "replay matched " << fresh.size() << " outputs\n";
  return o.exit_code;
}

}  // namespace

std::string file_digest(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(Errc::IoError, "cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (f.read(buf, sizeof buf) || f.gcount() > 0) {
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pedseg: paediatric brain tumour segmentation toolkit"};
  app.set_version_flag("--version", PEDSEG_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = "pedseg_out";
  std::map<std::string, std::string> args;
  std::string manifest_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed for every random stream");
    sub->add_option("--jobs", jobs, "worker threads for per-case work")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "output directory");
  };
  auto opt = [&](CLI::App* sub, const std::string& name, const std::string& help, bool required) {
    auto* o = sub->add_option("--" + name, args[name], help);
    if (required) o->required();
  };

  auto* pp = app.add_subcommand("postprocess", "ratio relabeling and small-component removal");
  opt(pp, "seg", "segmentation", true);
  opt(pp, "t1ce", "contrast-enhanced T1", true);
  opt(pp, "t1", "T1", true);
  opt(pp, "output", "output filename inside --out", false);
  auto* me = app.add_subcommand("metrics", "lesion-wise Dice and NSD per region");
  opt(me, "pred", "predicted labels", true);
  opt(me, "gt", "reference labels", true);
  auto* rs = app.add_subcommand("ratio-stats", "cohort percentile thresholds of T1CE/T1 ratios");
  opt(rs, "cohort", "text file listing case directories", true);
  auto* ro = app.add_subcommand("roc", "ET vs NET ROC of T1CE/T1 ratios over a cohort");
  opt(ro, "cohort", "text file listing case directories", true);
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  opt(gc, "op", "comma separated subset of ops", false);
  auto* pc = app.add_subcommand("paramcount", "parameter tables for the network variants");
  opt(pc, "kernel", "kernel size for the single-conv comparison", false);
  opt(pc, "cin", "input channels for the single-conv comparison", false);
  opt(pc, "cout", "output channels for the single-conv comparison", false);
  auto* sc = app.add_subcommand("schedule", "cosine learning-rate table");
  opt(sc, "step", "epoch stride of the table", false);
  auto* ts = app.add_subcommand("train-smoke", "train the toy network on synthetic blobs");
  auto* fp = app.add_subcommand("fp-experiment", "false-positive mass with and without the regularizer");
  auto* au = app.add_subcommand("augment", "draw and apply one augmentation");
  opt(au, "image", "intensity volume", true);
  opt(au, "seg", "labels", true);
  auto* pl = app.add_subcommand("plot", "JSONL training log to CSV and SVG");
  opt(pl, "log", "JSONL log", true);
  opt(pl, "columns", "comma separated fields to plot", false);
  auto* rp = app.add_subcommand("replay", "rerun a manifest and compare outputs");
  rp->add_option("--manifest", manifest_path, "manifest.json of the run to replay")->required();
  rp->add_option("--out", out_dir, "output directory");
  for (auto* sub : {pp, me, rs, ro, gc, pc, sc, ts, fp, au, pl}) common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << PEDSEG_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    report_error(err, "InvalidArgument", e.what());
    return kExitInput;
  }

  if (rp->parsed()) return replay(manifest_path, out_dir, out, err);

  Invocation inv;
  inv.subcommand = app.get_subcommands().front()->get_name();
  inv.seed = seed;
  inv.jobs = jobs;
  inv.out = out_dir;
  auto* sub = app.get_subcommands().front();
  for (const auto& [k, v] : args) {
    const auto* o = sub->get_option_no_throw("--" + k);
    if (o == nullptr || o->count() == 0) continue;
    // Input paths are recorded absolute so a manifest replays from anywhere.
    const bool is_path = k == "seg" || k == "t1ce" || k == "t1" || k == "pred" || k == "gt" || k == "cohort" ||
                         k == "image" || k == "log";
    inv.args[k] = is_path ? fs::absolute(v).lexically_normal().string() : v;
  }
  inv.seed_given = sub->get_option("--seed")->count() > 0;
  if (!config_path.empty()) {
    try {
      inv.config_path = fs::absolute(config_path).string();
      inv.config = KeyValueConfig::load(config_path).entries();
    } catch (const Error& e) {
      report_error(err, errc_name(e.code()), e.what());
      return kExitInput;
    }
  }
  return execute(inv, out, err).exit_code;
}

}  // namespace pedseg::cli
