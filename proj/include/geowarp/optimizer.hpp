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
 * @file optimizer.hpp
 * @brief Direct recovery of depth, pose and residual flow with Adam.
 *
 * Variables are per-pixel log-depth per frame, one pose per directed pair and
 * one residual flow per directed pair. A run is a list of stages; each stage
 * walks the pyramid from the coarsest level to level 0 and minimizes the
 * stage objective of that single level:
 *
 *   rigid     l_rw + lambda_ds l_ds                      over depth and poses
 *   residual  l_fw + lambda_fs l_fs + lambda_gc l_gc     over residual flows
 *   joint     both groups                                over everything
 *
 * Optimized variables are carried to the next level by bilinear upsampling
 * (flows doubled). Frozen variables are taken from the stage input at full
 * resolution and average-pooled to the current level.
 *
 * Each iteration takes an Adam step from the current point. If the loss
 * rises, the step is halved and retried up to a per-stage limit, after which
 * the last trial is accepted anyway. The halved step carries over to the
 * next iteration and regrows slowly on success. The best point of a level is
 * what the level returns, and the trace reports the best value so far.
 *
 * Stages with residual flow default to no halving. At zero residual every L1
 * smoothness and consistency term sits on its kink, so any per-pixel step
 * raises the loss at first, and a guard that rejects such steps never leaves
 * the rigid-only solution.
 */

#pragma once

#include <span>
#include <string>
#include <vector>

#include "geowarp/core_types.hpp"
#include "geowarp/objective.hpp"
#include "geowarp/rigid_geometry.hpp"

namespace geowarp {

enum class Stage { rigid, residual, joint };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& text);

struct AdamParams {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_iters = 2000;  // per pyramid level
  Stage stage = Stage::rigid;

  void validate() const;
};

/// Per-group multipliers on AdamParams::lr. The variables live in different
/// units (log-depth, radians, scene units, pixels).
struct LearningRateScale {
  double log_depth = 25.0;
  double rotation = 5.0;
  double translation = 25.0;
  double flow = 100.0;
};

struct OptimizerOptions {
  AdamParams adam;
  ObjectiveOptions objective;
  LearningRateScale lr_scale;
  bool optimize_depth = true;  // rigid and joint stages
  bool optimize_pose = true;
  double depth_min = 0.1;
  double depth_max = 100.0;
  int backtrack_halvings = 5;           // rigid stage
  int residual_backtrack_halvings = 0;  // residual and joint stages
  /// Halvings persist for the rest of the level, down to 2^-limit;
  /// each step accepted without halving multiplies the step factor by this
  /// value, capped at 1.
  double lr_growth = 1.05;
  /// DivergenceError once the loss exceeds this factor times
  /// max(best, divergence_floor); the floor keeps noise around a near-zero
  /// optimum from counting as a blow-up.
  double divergence_factor = 10.0;
  double divergence_floor = 1e-2;
  /// End a level early once the best loss has not improved by a relative
  /// `tolerance` for `patience` iterations. 0 disables.
  int patience = 0;
  double tolerance = 1e-9;
  /// Levels to run, coarsest first; clamped to objective.weights.num_scales.
  int num_levels = 4;

  void validate() const;
};

struct OptimState {
  int level = 0;
  std::vector<Grid> log_depth;      // per frame
  std::vector<PoseSE3> poses;       // per pair
  std::vector<FlowField> residual;  // per pair
  long iteration = 0;
  std::vector<double> adam_m;       // moments over the optimized variables
  std::vector<double> adam_v;
  long adam_t = 0;

  bool operator==(const OptimState&) const = default;
};

/// Gradients shaped like the optimized groups; an empty group is not updated.
struct OptimGradients {
  std::vector<Grid> log_depth;
  std::vector<PoseVector> poses;
  std::vector<Grid> residual;
};

/// Full-resolution state with constant depth, the given poses and zero residuals.
OptimState initial_state(int width, int height, int num_frames, std::span<const PoseSE3> poses,
                         double depth);
OptimState initial_state(std::span<const DepthMap> depth, std::span<const PoseSE3> poses);

std::vector<DepthMap> depth_of(const OptimState& state);

/// One Adam update with bias correction over the groups present in `grads`;
/// log-depth is projected to [log depth_min, log depth_max].
/// Throws NonFiniteGradientError on NaN or Inf gradients.
OptimState adam_step(const OptimState& state, const OptimGradients& grads,
                     const OptimizerOptions& options);

struct TraceRow {
  long iteration = 0;
  Stage stage = Stage::rigid;
  int level = 0;
  ScaleBreakdown best;    // breakdown at the best point of this level so far
  double total = 0.0;     // stage objective at that point
  double current = 0.0;   // stage objective at the accepted point
  int halvings = 0;
};

/// CSV with columns iteration,l_rw,l_ds,l_fw,l_fs,l_gc,total.
std::string trace_csv(std::span<const TraceRow> trace);

struct OptimResult {
  OptimState state;  // full resolution
  std::vector<TraceRow> trace;
};

/// Resumable multi-stage run. All inputs are full resolution.
class OptimizationRun {
 public:
  OptimizationRun(std::vector<Image> frames, CameraIntrinsics intrinsics, OptimState init,
                  std::vector<Stage> stages, OptimizerOptions options);

  bool finished() const noexcept { return finished_; }
  /// Runs until finished or until `max_steps` more iterations (negative: no limit).
  void run(long max_steps = -1);
  /// One iteration, including any level or stage transition before it.
  void step();

  /// The state at full resolution; only meaningful once finished.
  const OptimState& state() const noexcept { return current_; }
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }
  const std::vector<DirectedPair>& pairs() const noexcept { return pairs_; }

  /// Complete loop state as text (doubles in hexadecimal, exact round trip).
  std::string checkpoint() const;
  /// Continues a run from checkpoint(); frames, intrinsics and options must
  /// match the original run.
  static OptimizationRun restore(const std::string& text, std::vector<Image> frames,
                                 CameraIntrinsics intrinsics, OptimizerOptions options);

 private:
  struct Eval {
    ScaleBreakdown parts;
    double value = 0.0;
    OptimGradients grads;
  };

  void begin_level();
  void finish_level();
  Eval evaluate(const OptimState& s) const;
  ObjectiveOptions stage_objective() const;
  bool optimizes_depth() const;
  bool optimizes_pose() const;
  bool optimizes_residual() const;

  std::vector<Image> frames_;
  CameraIntrinsics intrinsics_;
  std::vector<Stage> stages_;
  OptimizerOptions options_;
  std::vector<DirectedPair> pairs_;
  std::vector<Pyramid<Image>> pyramids_;

  // Loop position.
  std::size_t stage_index_ = 0;
  int level_ = 0;
  int level_iter_ = 0;
  bool in_level_ = false;
  bool finished_ = false;
  long global_iter_ = 0;

  OptimState stage_input_;  // full resolution
  OptimState current_;      // at level_
  OptimState best_;
  ScaleBreakdown best_parts_;
  double best_value_ = 0.0;
  double current_value_ = 0.0;
  double mark_value_ = 0.0;  // best value when the patience window started
  double lr_factor_ = 1.0;   // current step multiplier from backtracking
  int since_mark_ = 0;
  std::vector<TraceRow> trace_;

  // Gradient at current_, reused from the accepted trial; not checkpointed.
  mutable bool have_eval_ = false;
  mutable Eval cached_;
};

/// Stage 1 alone: depth and poses under l_rw + lambda_ds l_ds.
OptimResult optimize_rigid(const std::vector<Image>& frames, const CameraIntrinsics& k,
                           const OptimState& init, const OptimizerOptions& options);
/// Stage 2 alone: residual flows with depth and poses frozen at `rigid`.
OptimResult optimize_residual(const std::vector<Image>& frames, const CameraIntrinsics& k,
                              const OptimState& rigid, const OptimizerOptions& options);

/// Breakdown and per-pair fields of a full-resolution state at level 0.
struct StateEvaluation {
  ScaleBreakdown parts;
  std::vector<PairFields> fields;
};
StateEvaluation evaluate_state(const std::vector<Image>& frames, const CameraIntrinsics& k,
                               const OptimState& state, const ObjectiveOptions& options);

}  // namespace geowarp
