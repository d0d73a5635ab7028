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
 * @file flow_viz.hpp
 * @brief Middlebury color-wheel rendering of flow fields.
 *
 * Hue encodes direction and saturation encodes magnitude relative to a
 * normalization radius; zero flow is white. Vectors longer than the radius
 * keep their hue and are darkened to 75%.
 */

#pragma once

#include <array>

#include "geowarp/core_types.hpp"

namespace geowarp {

enum class FlowNormalization { p99, absolute };

struct FlowVizOptions {
  FlowNormalization normalization = FlowNormalization::p99;
  double max_flow = 1.0;  // radius for absolute normalization, in pixels
};

/// RGB in [0,1] of the unit-radius wheel at (u, v) / radius.
std::array<double, 3> flow_color(double u, double v);

/// 99th percentile (nearest rank) of the flow magnitudes.
double flow_magnitude_p99(const FlowField& flow);

/// Three-channel image. A zero normalization radius renders every pixel white.
Image flow_to_color(const FlowField& flow, const FlowVizOptions& options = {});

}  // namespace geowarp
