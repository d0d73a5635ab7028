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
 * @file losses.hpp
 * @brief Scalar objectives and their reverse-mode derivatives.
 *
 * All reductions are weighted means (never raw sums) so that a loss has the
 * same magnitude on every pyramid level. Each `*_vjp` returns the gradient of
 * the scalar loss with respect to the variable input named in its comment;
 * masks and guide images are treated as constants.
 */

#pragma once

#include "geowarp/core_types.hpp"
#include "geowarp/warping.hpp"

namespace geowarp {

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

struct LossWeights {
  double alpha_ssim = 0.85;
  double lambda_ds = 0.5;
  double lambda_fs = 0.2;
  double lambda_gc = 0.2;
  int num_scales = 4;

  void validate() const;
};

/// Per-pixel, per-channel SSIM over 3x3 box windows with replicate padding.
Grid ssim_map(const Image& a, const Image& b);

/// d(sum(upstream * ssim_map(a, b))) / d b.
Grid ssim_map_vjp(const Image& a, const Image& b, const Grid& upstream);

/**
 * Weighted mean over pixels of
 *   alpha * (1 - SSIM) / 2 + (1 - alpha) * |target - warped|
 * (both terms averaged over channels). The weight of a pixel is
 * warped.valid * weight_mask; the mean divides by the sum of weights.
 *
 * Pixels with zero weight are replaced by the target before SSIM windows are
 * formed, so the loss does not depend on warped values it excludes.
 *
 * Throws DegenerateMaskError when the weights sum to zero.
 */
double photometric_loss(const Image& target, const WarpResult& warped, const Mask* weight_mask,
                        double alpha_ssim);

/// d photometric_loss / d warped.warped.
Grid photometric_loss_vjp(const Image& target, const WarpResult& warped, const Mask* weight_mask,
                          double alpha_ssim);

/**
 * Edge-aware first-order smoothness of a one- or two-channel field:
 *   mean over pixels with both forward differences defined of
 *   sum_c |dF_c/dx| exp(-|dI/dx|) + |dF_c/dy| exp(-|dI/dy|),
 * where |dI/d.| is averaged over the guide's channels.
 */
double edge_aware_smoothness(const Grid& field, const Image& guide);

/// d edge_aware_smoothness / d field.
Grid edge_aware_smoothness_vjp(const Grid& field, const Image& guide);

/// Mean over inlier pixels of |du| + |dv|. Throws DegenerateMaskError on an
/// empty inlier set.
double geometric_consistency_loss(const FlowField& delta, const Mask& inlier);

/// d geometric_consistency_loss / d delta.
Grid geometric_consistency_loss_vjp(const FlowField& delta, const Mask& inlier);

}  // namespace geowarp
