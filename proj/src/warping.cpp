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

#include "geowarp/warping.hpp"

#include "geowarp/errors.hpp"

namespace geowarp {

WarpResult inverse_warp(const Image& source, const FlowField& flow) {
  if (!source.same_extent(flow)) throw DimensionError("inverse_warp: source/flow extent mismatch");
  const int w = source.width();
  const int h = source.height();
  Grid warped(w, h, source.channels());
  Mask valid(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const BilinearTap t = make_tap(w, h, x + flow.u(x, y), y + flow.v(x, y));
      for (int c = 0; c < source.channels(); ++c) warped(x, y, c) = interpolate(source, t, c);
      valid(x, y) = t.in_bounds ? 1.0 : 0.0;
    }
  }
  return {Image(std::move(warped)), std::move(valid)};
}

WarpGradient inverse_warp_vjp(const Image& source, const FlowField& flow, const Grid& upstream) {
  if (!source.same_extent(flow) || !upstream.same_shape(source)) {
    throw DimensionError("inverse_warp_vjp: shape mismatch");
  }
  const int w = source.width();
  const int h = source.height();
  WarpGradient g{Grid(w, h, 2), Grid(w, h, source.channels())};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const BilinearTap t = make_tap(w, h, x + flow.u(x, y), y + flow.v(x, y));
      for (int c = 0; c < source.channels(); ++c) {
        const double up = upstream(x, y, c);
        if (up == 0.0) continue;
        const auto d = interpolate_gradient(source, t, c);
        g.d_flow(x, y, 0) += up * d[0];
        g.d_flow(x, y, 1) += up * d[1];
        scatter(g.d_source, t, c, up);
      }
    }
  }
  return g;
}

}  // namespace geowarp
