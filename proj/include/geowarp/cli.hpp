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

/**
 * @file cli.hpp
 * @brief The `geowarp` command line: scene generation, optimization,
 * evaluation, flow rendering and gradient audits.
 *
 * Exit codes: 0 success, 1 verification failure (failed audit, failed scene
 * self-check, diverged run), 2 usage or configuration error (including
 * missing input files), 3 I/O error while writing.
 *
 * Outputs go to --out, or else to $GEOWARP_OUT/<name>, or else to
 * ./geowarp_out/<name>. A command that fails after creating its output
 * directory leaves a FAILED file there holding the error message.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geowarp/config.hpp"
#include "geowarp/errors.hpp"
#include "geowarp/optimizer.hpp"

namespace geowarp::cli {

enum ExitCode : int { kOk = 0, kVerificationFailure = 1, kUsageError = 2, kIoError = 3 };

/// Bad command line or missing input; exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Common {
  int threads = 1;
  bool reproducible = false;  // no wall-clock values in any output
};

struct GenSceneArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

struct OptimizeArgs {
  std::filesystem::path scene;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> init;  // earlier optimize output: depth and poses
  std::string stage = "all";                  // rigid, residual, joint or all (rigid, residual)
  bool resume = false;
  long max_steps = -1;      // stop after this many iterations, leaving a checkpoint
  long checkpoint_every = 0;
};

struct EvalDepthArgs {
  std::filesystem::path pred;
  std::filesystem::path gt;
  double cap = 100.0;
  bool median_scale = true;
  std::optional<std::filesystem::path> out;  // CSV
};

struct EvalFlowArgs {
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::string kind = "full";  // prediction file kind: full, rigid or residual
  int bins = 0;               // residual-magnitude histogram when > 0
  double bin_width = 1.0;
  std::optional<std::filesystem::path> out;
};

struct EvalPoseArgs {
  std::filesystem::path pred;  // trajectory files
  std::filesystem::path gt;
  int snippet = 5;
  std::optional<std::filesystem::path> out;
};

struct VizFlowArgs {
  std::filesystem::path flow;
  std::optional<std::filesystem::path> out;
  std::optional<double> max_flow;  // absolute normalization
};

struct GradcheckArgs {
  std::vector<std::string> ops;
  int trials = 20;
  std::uint64_t seed = 0;
  bool per_trial = false;
  bool corrupt = false;  // test hook
  std::optional<std::filesystem::path> out;
};

int gen_scene(const GenSceneArgs& args, const Common& common, std::ostream& out);
int optimize(const OptimizeArgs& args, const Common& common, std::ostream& out);
int eval_depth(const EvalDepthArgs& args, const Common& common, std::ostream& out);
int eval_flow(const EvalFlowArgs& args, const Common& common, std::ostream& out);
int eval_pose(const EvalPoseArgs& args, const Common& common, std::ostream& out);
int viz_flow(const VizFlowArgs& args, const Common& common, std::ostream& out);
int gradcheck(const GradcheckArgs& args, const Common& common, std::ostream& out);

/// Options of the optimize command from the [optimizer], [lr_scale], [loss]
/// and [consistency] sections; unknown keys in those sections are rejected
/// by the caller.
OptimizerOptions optimizer_options_from_config(const Config& config);
std::vector<Stage> parse_stages(const std::string& stage);

/// Output directory for `name` when --out is absent.
std::filesystem::path default_output(const std::string& name);

/// Parses argv, runs the command and maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geowarp::cli
