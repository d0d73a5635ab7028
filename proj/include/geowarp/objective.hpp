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
 * @file objective.hpp
 * @brief The complete warping objective over frame pairs and pyramid scales.
 *
 * For every directed pair (t, s) and scale l:
 *
 *   rigid    = rigid_flow(D_t, T_{t->s}, K_l)
 *   full     = rigid + residual_{t->s}
 *   delta    = flow_difference(full_{t->s}, full_{s->t})
 *   inlier   = inlier_mask(delta, full_{t->s})   (or all ones, MaskMode::all_ones)
 *
 *   l_rw = photometric(I_t, warp(I_s, rigid))            weights: rigid validity
 *   l_ds = smoothness(D_t, I_t)
 *   l_fw = photometric(I_t, warp(I_s, full))             weights: validity * inlier
 *   l_fs = smoothness(residual_{t->s}, I_t)
 *   l_gc = consistency(delta, inlier)
 *
 *   total = sum_l sum_(t,s) l_rw + lambda_ds l_ds + l_fw + lambda_fs l_fs + lambda_gc l_gc
 *
 * Masks are piecewise constant in the variables and carry no gradient.
 */

#pragma once

#include <span>
#include <string>
#include <vector>

#include "geowarp/consistency.hpp"
#include "geowarp/core_types.hpp"
#include "geowarp/losses.hpp"
#include "geowarp/rigid_geometry.hpp"

namespace geowarp {

struct DirectedPair {
  int target = 0;
  int source = 1;
  bool operator==(const DirectedPair&) const = default;
};

/// Adjacent frames in both directions: (0,1), (1,0), (1,2), (2,1), ...
std::vector<DirectedPair> adjacent_pairs(int num_frames);

/// Index of the pair running the other way. Throws DomainError if absent.
std::size_t reverse_pair_index(std::span<const DirectedPair> pairs, std::size_t i);

enum class MaskMode {
  adaptive,  // forward-backward inlier test
  all_ones,  // naive: every pixel enters l_fw and l_gc
};

/// Which group of terms the optimized objective contains.
struct TermSelection {
  bool rigid = true;     // l_rw + lambda_ds l_ds
  bool residual = true;  // l_fw + lambda_fs l_fs + lambda_gc l_gc
};

struct ObjectiveOptions {
  LossWeights weights;
  ConsistencyParams consistency;
  MaskMode mask_mode = MaskMode::adaptive;
  TermSelection terms;
  int threads = 1;
};

struct ScaleBreakdown {
  double l_rw = 0.0;
  double l_ds = 0.0;
  double l_fw = 0.0;
  double l_fs = 0.0;
  double l_gc = 0.0;

  ScaleBreakdown& operator+=(const ScaleBreakdown& o);
};

struct LossBreakdown {
  double l_rw = 0.0;
  double l_ds = 0.0;
  double l_fw = 0.0;
  double l_fs = 0.0;
  double l_gc = 0.0;
  double total = 0.0;
  std::vector<ScaleBreakdown> per_scale;

  /// `key = value` per line, including per-scale entries.
  std::string to_text() const;
};

/// Weighted sum of all five terms.
double weighted_total(const ScaleBreakdown& b, const LossWeights& w);
/// Weighted sum restricted to the selected term groups.
double selected_total(const ScaleBreakdown& b, const LossWeights& w, const TermSelection& terms);

/// Everything the objective needs at one pyramid scale.
struct ScaleInputs {
  std::span<const Image> frames;        // per frame
  std::span<const DepthMap> depth;      // per frame
  std::span<const DirectedPair> pairs;
  std::span<const PoseSE3> poses;       // per pair
  std::span<const FlowField> residual;  // per pair; empty means zero
  CameraIntrinsics intrinsics;          // already scaled to this level
};

struct ScaleGradients {
  std::vector<Grid> d_depth;     // per frame, d/d depth (linear depth)
  std::vector<PoseVector> d_pose;  // per pair
  std::vector<Grid> d_residual;  // per pair
};

/// Intermediate per-pair fields, exposed for inspection and output writing.
struct PairFields {
  FlowField rigid;
  Mask rigid_valid;
  FlowField full;
  FlowDifference difference;
  Mask inlier;
};

/// Evaluates all five terms at one scale. When `grad` is non-null it receives
/// the gradient of selected_total(..., options.terms) with respect to depth,
/// poses and residual flows.
ScaleBreakdown evaluate_scale(const ScaleInputs& in, const ObjectiveOptions& options,
                              ScaleGradients* grad = nullptr,
                              std::vector<PairFields>* fields = nullptr);

/// Predictions for every scale of a frame batch.
struct PredictionSet {
  std::vector<Pyramid<Image>> frames;            // [frame]
  std::vector<DirectedPair> pairs;
  std::vector<std::vector<DepthMap>> depth;      // [frame][scale]
  std::vector<PoseSE3> poses;                    // [pair]; shared by all scales
  std::vector<std::vector<FlowField>> residual;  // [pair][scale]; may be empty
  CameraIntrinsics intrinsics;                   // level 0
};

/// Sum over scales and directed pairs (num_scales taken from the weights).
LossBreakdown total_loss(const PredictionSet& set, const ObjectiveOptions& options);

}  // namespace geowarp
