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

struct WarpResult {
  Image warped;
  Mask valid;  // 1 where the displaced coordinate lies inside the source grid
};

/// warped(p) = source(p + flow(p)), bilinear, clamp-to-border.
WarpResult inverse_warp(const Image& source, const FlowField& flow);

struct WarpGradient {
  Grid d_flow;    // two channels
  Grid d_source;  // shaped like the source
};

/// Reverse-mode derivative of inverse_warp for a cotangent shaped like the
/// warped image. The source scatter runs in raster order, so the result is
/// bit-reproducible.
WarpGradient inverse_warp_vjp(const Image& source, const FlowField& flow, const Grid& upstream);

}  // namespace geowarp
