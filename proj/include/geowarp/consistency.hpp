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

#pragma once

#include "geowarp/core_types.hpp"

namespace geowarp {

/// Adaptive outlier thresholds: a pixel is an inlier when
/// |df|_2 < max(alpha_px, beta_rel * |f|_2).
struct ConsistencyParams {
  double alpha_px = 3.0;
  double beta_rel = 0.05;

  void validate() const;
};

struct FlowDifference {
  FlowField delta;
  Mask valid;  // 1 where the backward lookup landed inside the grid
};

/// delta(p) = fwd(p) + bwd(p + fwd(p)), backward flow sampled bilinearly.
FlowDifference flow_difference(const FlowField& fwd, const FlowField& bwd);

struct FlowDifferenceGradient {
  Grid d_fwd;
  Grid d_bwd;
};

/// Reverse-mode derivative of flow_difference for a two-channel cotangent.
FlowDifferenceGradient flow_difference_vjp(const FlowField& fwd, const FlowField& bwd,
                                           const Grid& upstream);

/// Strict-inequality inlier test; pixels whose lookup left the grid are
/// outliers.
Mask inlier_mask(const FlowDifference& diff, const FlowField& fwd, const ConsistencyParams& params);

/// Same test without a validity mask (every delta treated as valid).
Mask inlier_mask(const FlowField& delta, const FlowField& fwd, const ConsistencyParams& params);

}  // namespace geowarp
