// Copyright 2026 The geowarp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <map>
#include <sstream>

#include "doctest.h"
#include "geowarp/cli.hpp"
#include "geowarp/io.hpp"
#include "geowarp/synthetic_scenes.hpp"
#include "temp_dir.hpp"

using namespace geowarp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

constexpr const char* kScene =
    "[scene]\n"
    "width = 48\n"
    "height = 32\n"
    "intrinsics = 40 40 23.5 15.5\n"
    "layout = slanted\n"
    "depth = 2\n"
    "slant = 0.1 0.1\n"
    "frames = 2\n"
    "seed = 5\n"
    "pose.1 = 0 0.01 0 -0.08 0.02 0.01\n"
    "[object.0]\n"
    "rect = 12 8 10 8\n"
    "velocity = 2 0\n";

constexpr const char* kOptimizer =
    "[optimizer]\n"
    "iters = 15\n"
    "levels = 2\n"
    "optimize_pose = false\n"
    "[loss]\n"
    "num_scales = 2\n"
    "[init]\n"
    "depth = 1.5\n";

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = io::read_file(e.path());
  return files;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("gen-scene writes a complete, reproducible scene") {
    TempDir dir("cli_gen");
    io::write_file(dir / "s.cfg", kScene);
    const Result a = run({"--reproducible", "gen-scene", "--config", (dir / "s.cfg").string(), "--out", (dir / "a").string()});
    REQUIRE(a.code == 0);
    for (const char* f : {"frame_000.ppm", "depth_001.pfm", "flow_full_0_1.flo", "flow_rigid_1_0.flo",
                          "flow_residual_0_1.flo", "occlusion_0_1.pgm", "poses.txt", "scene.cfg", "manifest.txt", "DONE"})
      CHECK(fs::exists(dir / "a" / f));
    const Result b = run({"--reproducible", "gen-scene", "--config", (dir / "s.cfg").string(), "--out", (dir / "b").string()});
    REQUIRE(b.code == 0);
    CHECK(snapshot(dir / "a") == snapshot(dir / "b"));
    const Result c = run({"gen-scene", "--config", (dir / "s.cfg").string(), "--out", (dir / "c").string(), "--seed", "6"});
    REQUIRE(c.code == 0);
    CHECK(io::read_file(dir / "c" / "frame_000.ppm") != io::read_file(dir / "a" / "frame_000.ppm"));
  }

  TEST_CASE("configuration errors exit with 2") {
    TempDir dir("cli_bad");
    io::write_file(dir / "oob.cfg", "[scene]\nwidth = 96\n[object.0]\nrect = 90 10 20 5\nvelocity = 0 0\n");
    const Result oob = run({"gen-scene", "--config", (dir / "oob.cfg").string(), "--out", (dir / "o").string()});
    CHECK(oob.code == 2);
    CHECK(oob.err.find("object.0.rect") != std::string::npos);
    io::write_file(dir / "unknown.cfg", "[scene]\nbogus = 1\n");
    const Result unk = run({"gen-scene", "--config", (dir / "unknown.cfg").string(), "--out", (dir / "u").string()});
    CHECK(unk.code == 2);
    CHECK(unk.err.find("scene.bogus") != std::string::npos);
    CHECK(run({"gen-scene", "--config", (dir / "missing.cfg").string()}).code == 2);
    CHECK(run({"no-such-command"}).code == 2);
    CHECK(run({"eval-pose", "--pred", (dir / "a.txt").string(), "--gt", (dir / "b.txt").string()}).code == 2);
    CHECK(run({"optimize", "--scene", (dir / "nowhere").string()}).code == 2);
  }

  TEST_CASE("unwritable output exits with 3") {
    TempDir dir("cli_io");
    io::write_file(dir / "s.cfg", kScene);
    io::write_file(dir / "file", "x");
    const Result r = run({"gen-scene", "--config", (dir / "s.cfg").string(), "--out", (dir / "file" / "sub").string()});
    CHECK(r.code == 3);
  }

  TEST_CASE("optimize stages, evaluation and resume") {
    TempDir dir("cli_opt");
    io::write_file(dir / "s.cfg", kScene);
    io::write_file(dir / "o.cfg", kOptimizer);
    const std::string scene = (dir / "scene").string();
    REQUIRE(run({"gen-scene", "--config", (dir / "s.cfg").string(), "--out", scene}).code == 0);

    const std::string rigid = (dir / "rigid").string();
    const Result r = run({"--reproducible", "optimize", "--scene", scene, "--config", (dir / "o.cfg").string(), "--out", rigid,
                          "--stage", "rigid"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "rigid" / "depth_000.pfm"));
    CHECK(fs::exists(dir / "rigid" / "flow_rigid_0_1.flo"));
    CHECK(fs::exists(dir / "rigid" / "trace.csv"));
    CHECK_FALSE(fs::exists(dir / "rigid" / "flow_residual_0_1.flo"));
    CHECK_FALSE(fs::exists(dir / "rigid" / "flow_full_0_1.flo"));
    const std::string trace = io::read_file(dir / "rigid" / "trace.csv");
    CHECK(trace.rfind("iteration,l_rw,l_ds,l_fw,l_fs,l_gc,total\n", 0) == 0);

    const std::string full = (dir / "full").string();
    REQUIRE(run({"--reproducible", "optimize", "--scene", scene, "--config", (dir / "o.cfg").string(), "--out", full}).code == 0);
    CHECK(fs::exists(dir / "full" / "flow_residual_0_1.flo"));
    CHECK(fs::exists(dir / "full" / "flow_full_1_0.flo"));
    CHECK(fs::exists(dir / "full" / "inlier_0_1.pgm"));

    const std::string part = (dir / "part").string();
    REQUIRE(run({"--reproducible", "optimize", "--scene", scene, "--config", (dir / "o.cfg").string(), "--out", part,
                 "--max-steps", "37"})
                .code == 0);
    CHECK_FALSE(fs::exists(dir / "part" / "DONE"));
    REQUIRE(run({"--reproducible", "optimize", "--scene", scene, "--out", part, "--resume"}).code == 0);
    const auto want = snapshot(dir / "full");
    const auto got = snapshot(dir / "part");
    for (const auto& [name, bytes] : want) {
      if (name == "run.cfg") continue;
      REQUIRE(got.count(name) == 1);
      CHECK_MESSAGE(got.at(name) == bytes, name);
    }

    const Result self = run({"eval-depth", "--pred", scene, "--gt", scene});
    CHECK(self.code == 0);
    CHECK(self.out.find("abs_rel = 0\n") != std::string::npos);
    CHECK(self.out.find("delta1 = 1\n") != std::string::npos);
    CHECK(run({"eval-depth", "--pred", full, "--gt", scene, "--out", (dir / "d.csv").string()}).code == 0);
    CHECK(fs::exists(dir / "d.csv"));

    // Rigid-only flow is worse than the ground-truth full flow on a moving object.
    const Result rig = run({"eval-flow", "--pred", scene, "--gt", scene, "--kind", "rigid", "--out", (dir / "r.csv").string()});
    const Result ful = run({"eval-flow", "--pred", scene, "--gt", scene, "--kind", "full", "--bins", "3"});
    CHECK(rig.code == 0);
    CHECK(ful.code == 0);
    CHECK(ful.out.find("all = 0\n") != std::string::npos);
    CHECK(rig.out.find("all = 0\n") == std::string::npos);

    CHECK(run({"eval-pose", "--pred", (dir / "full" / "trajectory.txt").string(), "--gt",
               (dir / "scene" / "trajectory.txt").string(), "--snippet", "2"})
              .code == 0);
    CHECK(run({"viz-flow", "--flow", (dir / "full" / "flow_full_0_1.flo").string(), "--out", (dir / "v.ppm").string()}).code == 0);
    CHECK(fs::exists(dir / "v.ppm"));
  }

  TEST_CASE("gradcheck exit codes") {
    TempDir dir("cli_gc");
    const Result ok = run({"gradcheck", "--op", "bilinear_sample", "--trials", "5", "--out", (dir / "gc.txt").string()});
    CHECK(ok.code == 0);
    CHECK(fs::exists(dir / "gc.txt"));
    const Result table = run({"gradcheck", "--op", "inverse_warp", "--trials", "100", "--per-trial"});
    CHECK(table.code == 0);
    CHECK(table.out.find("inverse_warp") != std::string::npos);
    const Result bad = run({"gradcheck", "--op", "ssim", "--trials", "2", "--corrupt-gradient"});
    CHECK(bad.code == 1);
    CHECK(run({"gradcheck", "--op", "bogus"}).code == 2);
  }

  TEST_CASE("stage list parsing") {
    CHECK(cli::parse_stages("all") == std::vector<Stage>{Stage::rigid, Stage::residual});
    CHECK(cli::parse_stages("joint") == std::vector<Stage>{Stage::joint});
    CHECK_THROWS(cli::parse_stages("nope"));
  }
}
