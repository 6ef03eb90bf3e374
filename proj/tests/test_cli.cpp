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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "pedseg/nifti.hpp"

using namespace pedseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pedseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("pedseg_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

json read_json(const std::string& p) {
  std::ifstream f(p);
  return json::parse(f);
}

std::string read_text(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void write_text(const std::string& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

void save_labels(const std::string& p, const LabelVolume& v) { nifti::write_file(p, nifti::from_label_volume(v)); }
void save_grid(const std::string& p, const VoxelGrid& v) {
  nifti::write_file(p, nifti::from_voxel_grid(v, nifti::Datatype::Float64));
}

// A 6^3 ET block (216 mm^3) and a 2^3 ET speck (8 mm^3) that stays detached
// after one dilation.
LabelVolume speck_fixture() {
  LabelVolume seg({14, 14, 14}, Spacing{});
  for (int z = 1; z < 7; ++z)
    for (int y = 1; y < 7; ++y)
      for (int x = 1; x < 7; ++x) seg.at(x, y, z) = 1;
  for (int z = 11; z < 13; ++z)
    for (int y = 11; y < 13; ++y)
      for (int x = 11; x < 13; ++x) seg.at(x, y, z) = 1;
  return seg;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run_cli({}).code == cli::kExitInput);
  const Result r = run_cli({"metrics", "--pred", "/nonexistent/a.nii", "--gt", "/nonexistent/b.nii", "--out",
                            (fs::temp_directory_path() / "pedseg_cli_missing").string()});
  CHECK(r.code == cli::kExitInput);
  const json e = json::parse(r.err.substr(0, r.err.find('\n')));
  CHECK(e.at("error") == "IoError");
  fs::remove_all(fs::temp_directory_path() / "pedseg_cli_missing");
}

TEST_CASE("postprocess") {
  TempDir dir("post");
  save_labels(dir / "seg.nii.gz", speck_fixture());
  save_grid(dir / "t1ce.nii.gz", VoxelGrid({14, 14, 14}, Spacing{}, 1.0));
  save_grid(dir / "t1.nii.gz", VoxelGrid({14, 14, 14}, Spacing{}, 1.0));

  const Result r = run_cli({"postprocess", "--seg", dir / "seg.nii.gz", "--t1ce", dir / "t1ce.nii.gz", "--t1",
                            dir / "t1.nii.gz", "--out", dir / "run"});
  REQUIRE(r.code == cli::kExitOk);
  const LabelVolume out = nifti::to_label_volume(nifti::read_file(dir / "run/seg_postprocessed.nii.gz"));
  CHECK(out.at(3, 3, 3) == 1);
  CHECK(out.at(11, 11, 11) == 0);
  CHECK(read_json(dir / "run/postprocess_report.json").at("voxels_changed") == 8);

  SUBCASE("neutral config writes the input back unchanged") {
    write_text(dir / "neutral.cfg", "relabel = false\nvolume_thresholds = {}\n");
    const Result n = run_cli({"postprocess", "--config", dir / "neutral.cfg", "--seg", dir / "seg.nii.gz", "--t1ce",
                              dir / "t1ce.nii.gz", "--t1", dir / "t1.nii.gz", "--out", dir / "neutral"});
    REQUIRE(n.code == cli::kExitOk);
    CHECK(read_text(dir / "neutral/seg_postprocessed.nii.gz") == read_text(dir / "seg.nii.gz"));
  }
  SUBCASE("dims mismatch is an input error") {
    save_grid(dir / "small.nii.gz", VoxelGrid({14, 14, 13}, Spacing{}, 1.0));
    const Result m = run_cli({"postprocess", "--seg", dir / "seg.nii.gz", "--t1ce", dir / "t1ce.nii.gz", "--t1",
                              dir / "small.nii.gz", "--out", dir / "bad"});
    CHECK(m.code == cli::kExitInput);
    CHECK(m.err.find("DimsMismatch") != std::string::npos);
    CHECK(read_json(dir / "bad/manifest.json").at("exit_code") == cli::kExitInput);
  }
}

TEST_CASE("metrics") {
  TempDir dir("metrics");
  const LabelVolume gt = speck_fixture();
  save_labels(dir / "gt.nii.gz", gt);
  save_labels(dir / "empty.nii.gz", LabelVolume(gt.dims(), gt.spacing()));
  REQUIRE(run_cli({"metrics", "--pred", dir / "gt.nii.gz", "--gt", dir / "gt.nii.gz", "--out", dir / "same"}).code ==
          cli::kExitOk);
  const json same = read_json(dir / "same/metrics.json");
  for (const auto& [name, v] : same.at("lesion_wise_dice").items()) CHECK(v == 1.0);

  REQUIRE(run_cli({"metrics", "--pred", dir / "empty.nii.gz", "--gt", dir / "gt.nii.gz", "--out", dir / "zero"}).code ==
          cli::kExitOk);
  const json zero = read_json(dir / "zero/metrics.json");
  CHECK(zero.at("lesion_wise_dice").at("ET") == 0.0);
  CHECK(zero.at("lesion_wise_dice").at("CC") == 1.0);
  CHECK(zero.at("columns") == json({"CC", "ED", "ET", "NET", "TC", "WT"}));
}

TEST_CASE("cohort statistics and ROC") {
  TempDir dir("cohort");
  // Twenty NET ratios per case whose 95th nearest-rank value is 1.388, twenty
  // ET ratios whose 5th is 0.766.
  for (int c = 0; c < 2; ++c) {
    const fs::path cdir = dir.path / ("case" + std::to_string(c));
    fs::create_directories(cdir);
    LabelVolume seg({10, 4, 1}, Spacing{});
    VoxelGrid t1ce({10, 4, 1}, Spacing{}, 1.0), t1({10, 4, 1}, Spacing{}, 1.0);
    for (int i = 0; i < 20; ++i) {
      const int x = i % 10, y = i / 10;
      seg.at(x, y, 0) = 2;
      t1ce.at(x, y, 0) = i == 18 ? 1.388 : i == 19 ? 2.0 : 1.0;
      seg.at(x, y + 2, 0) = 1;
      t1ce.at(x, y + 2, 0) = i == 0 ? 0.766 : 3.0;
    }
    save_labels((cdir / "seg.nii.gz").string(), seg);
    save_grid((cdir / "t1ce.nii.gz").string(), t1ce);
    save_grid((cdir / "t1.nii.gz").string(), t1);
  }
  write_text(dir / "cohort.txt", "# two cases\ncase1\ncase0\n\n");
  write_text(dir / "raw.cfg", "normalize_inputs = false\n");

  const Result r =
      run_cli({"ratio-stats", "--cohort", dir / "cohort.txt", "--config", dir / "raw.cfg", "--out", dir / "stats"});
  REQUIRE(r.code == cli::kExitOk);
  const json s = read_json(dir / "stats/ratio_stats.json");
  CHECK(s.at("upper") == 1.388);
  CHECK(s.at("lower") == 0.766);
  CHECK(s.at("net_samples") == 40);
  CHECK(s.at("cases")[0].at("case").get<std::string>().ends_with("case0"));

  // ET ratios 0.766 overlap NET ratios 1.0 and below, so separate the cohort
  // by dropping the low ET voxel via the exclusion band.
  write_text(dir / "sep.cfg", "normalize_inputs = false\nexclusion = [0.8, 5]\n");
  const Result roc =
      run_cli({"roc", "--cohort", dir / "cohort.txt", "--config", dir / "sep.cfg", "--jobs", "2", "--out", dir / "roc"});
  REQUIRE(roc.code == cli::kExitOk);
  CHECK(read_json(dir / "roc/roc.json").at("auc") == 1.0);
  CHECK(read_text(dir / "roc/roc.csv").starts_with("threshold,fpr,tpr\n"));

  write_text(dir / "empty.txt", "# nothing\n");
  CHECK(run_cli({"ratio-stats", "--cohort", dir / "empty.txt", "--out", dir / "none"}).code == cli::kExitInput);
}

TEST_CASE("schedule, paramcount, gradcheck") {
  TempDir dir("math");
  REQUIRE(run_cli({"schedule", "--step", "250", "--out", dir / "sched"}).code == cli::kExitOk);
  const json sj = read_json(dir / "sched/schedule.json");
  REQUIRE(sj.at("rows").size() == 5);
  CHECK(sj.at("rows")[0].at("lr") == 1e-2);
  CHECK(sj.at("rows")[2].at("lr") == 5e-3);
  CHECK(sj.at("rows")[4].at("lr") == 0.0);

  REQUIRE(run_cli({"paramcount", "--kernel", "3", "--cin", "32", "--cout", "32", "--out", dir / "pc"}).code ==
          cli::kExitOk);
  const json pc = read_json(dir / "pc/paramcount.json");
  CHECK(pc.at("conv").at("standard") == 27648);
  CHECK(pc.at("conv").at("separable") == 1888);
  CHECK(pc.at("presets").contains("widened"));

  write_text(dir / "gc.cfg", "gradcheck.seeds = 1\n");
  const Result g =
      run_cli({"gradcheck", "--op", "instance_norm,loss_fp_regularizer", "--config", dir / "gc.cfg", "--out", dir / "gc"});
  CHECK(g.code == cli::kExitOk);
  CHECK(read_json(dir / "gc/gradcheck.json").at("ops").size() == 2);
}

TEST_CASE("manifest and replay") {
  TempDir dir("replay");
  write_text(dir / "s.cfg", "optim.horizon = 20\n");
  REQUIRE(run_cli({"schedule", "--config", dir / "s.cfg", "--seed", "7", "--out", dir / "a"}).code == cli::kExitOk);
  const std::string text = read_text(dir / "a/manifest.json");
  const json m = json::parse(text);
  for (const char* k : {"subcommand", "invocation", "resolved_config", "inputs", "outputs", "seed", "version", "simd",
                        "wall_time_s", "exit_code"})
    CHECK(m.contains(k));
  CHECK(m.at("seed") == 7);
  CHECK(m.at("resolved_config").at("optim").at("horizon") == 20);
  CHECK(m.at("outputs").at("schedule.csv") == cli::file_digest(dir / "a/schedule.csv"));
  // keys are written in sorted order
  CHECK(text.find("\"exit_code\"") < text.find("\"inputs\""));
  CHECK(text.find("\"inputs\"") < text.find("\"outputs\""));

  const Result r = run_cli({"replay", "--manifest", dir / "a/manifest.json", "--out", dir / "b"});
  CHECK(r.code == cli::kExitOk);
  CHECK(read_text(dir / "a/schedule.csv") == read_text(dir / "b/schedule.csv"));

  // A tampered digest is caught.
  json bad = m;
  bad["outputs"]["schedule.csv"] = "0000000000000000";
  write_text(dir / "bad.json", bad.dump());
  CHECK(run_cli({"replay", "--manifest", dir / "bad.json", "--out", dir / "c"}).code == cli::kExitCheck);
}

TEST_CASE("plot") {
  TempDir dir("plot");
  write_text(dir / "log.jsonl",
             "{\"epoch\":0,\"loss\":1.5,\"train_dice\":0.2}\n{\"epoch\":1,\"loss\":0.9,\"train_dice\":0.6}\n");
  REQUIRE(run_cli({"plot", "--log", dir / "log.jsonl", "--out", dir / "p"}).code == cli::kExitOk);
  const std::string csv = read_text(dir / "p/curve.csv");
  CHECK(csv.starts_with("epoch,loss,train_dice\n"));
  CHECK(read_text(dir / "p/curve.svg").find("<svg") != std::string::npos);
}
