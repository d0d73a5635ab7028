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
 * @file metrics.hpp
 * @brief Depth error measures, flow end-point error and trajectory error.
 */

#pragma once

#include <span>
#include <string>
#include <vector>

#include "geowarp/core_types.hpp"
#include "geowarp/rigid_geometry.hpp"

namespace geowarp {

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;  // fraction with max(p/g, g/p) < 1.25
  double delta2 = 0.0;  // < 1.25^2
  double delta3 = 0.0;  // < 1.25^3
  double scale = 1.0;   // factor applied to pred before comparison
  std::size_t count = 0;
};

struct DepthMetricOptions {
  double cap = 100.0;  // both maps are clamped to (0, cap]
  bool median_scale = true;
};

/// Errors over pixels with valid > 0. Throws DegenerateMaskError on an empty
/// valid set and DomainError if gt is not positive there.
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const Mask& valid,
                           const DepthMetricOptions& options = {});

/// Mean of |pred - gt|_2 over pixels with region > 0.
double flow_epe(const FlowField& pred, const FlowField& gt, const Mask& region);

struct FlowEpe {
  double noc = 0.0;  // non-occluded pixels
  double all = 0.0;  // every pixel
};
FlowEpe flow_epe_noc_all(const FlowField& pred, const FlowField& gt, const Mask& occlusion);

struct ResidualBin {
  double lower = 0.0;  // residual magnitude range [lower, upper)
  double upper = 0.0;
  std::size_t count = 0;  // 0 means the bin is absent
  double mean_epe = 0.0;
};

/// Pixels binned by |gt_full - gt_rigid|_2 into `num_bins` bins of
/// `bin_width` pixels; the last bin is open above.
std::vector<ResidualBin> epe_vs_residual_histogram(const FlowField& pred,
                                                   const FlowField& gt_full,
                                                   const FlowField& gt_rigid, int num_bins,
                                                   double bin_width = 1.0);

using Trajectory = std::vector<Point3D>;

/// Camera centers of world -> camera poses.
Trajectory camera_positions(std::span<const PoseSE3> poses);

/// Consecutive windows of `length` positions, stride 1.
std::vector<Trajectory> trajectory_snippets(const Trajectory& positions, int length = 5);

/// Both snippets are translated so their first position is the origin, then
/// pred is scaled by the least-squares factor. Returns the mean position
/// error over all positions of the snippet.
double ate_snippet(const Trajectory& pred, const Trajectory& gt, double* scale = nullptr);

struct AteSummary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation over snippets
  std::size_t snippets = 0;
};
AteSummary ate(std::span<const Trajectory> pred, std::span<const Trajectory> gt);

/// Key-value text and single-row CSV renderings for reports.
std::string to_text(const DepthMetrics& m);
std::string to_csv(const DepthMetrics& m);
std::string to_text(const FlowEpe& e);
std::string to_csv(const FlowEpe& e);
std::string to_text(const AteSummary& a);
std::string to_csv(const AteSummary& a);
std::string histogram_csv(std::span<const ResidualBin> bins);

}  // namespace geowarp
