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

#include "geowarp/consistency.hpp"

#include <algorithm>
#include <cmath>

#include "geowarp/errors.hpp"

namespace geowarp {

namespace {

Mask classify(const FlowField& delta, const Mask* valid, const FlowField& fwd,
              const ConsistencyParams& params) {
  params.validate();
  if (!delta.same_shape(fwd) || (valid != nullptr && !delta.same_extent(*valid))) {
    throw DimensionError("inlier_mask: extent mismatch");
  }
  Mask out(delta.width(), delta.height(), 0.0);
  for (int y = 0; y < delta.height(); ++y) {
    for (int x = 0; x < delta.width(); ++x) {
      if (valid != nullptr && (*valid)(x, y) == 0.0) continue;
      const double err = std::hypot(delta.u(x, y), delta.v(x, y));
      const double mag = std::hypot(fwd.u(x, y), fwd.v(x, y));
      out(x, y) = err < std::max(params.alpha_px, params.beta_rel * mag) ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace

void ConsistencyParams::validate() const {
  if (!(alpha_px > 0.0)) throw InvalidSpecError("consistency.alpha", "must be positive");
  if (!(beta_rel >= 0.0)) throw InvalidSpecError("consistency.beta", "must be nonnegative");
}

FlowDifference flow_difference(const FlowField& fwd, const FlowField& bwd) {
  if (!fwd.same_shape(bwd)) throw DimensionError("flow_difference: shape mismatch");
  const int w = fwd.width(), h = fwd.height();
  FlowDifference out{FlowField(w, h), Mask(w, h, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const BilinearTap t = make_tap(w, h, x + fwd.u(x, y), y + fwd.v(x, y));
      out.delta.u(x, y) = fwd.u(x, y) + interpolate(bwd, t, 0);
      out.delta.v(x, y) = fwd.v(x, y) + interpolate(bwd, t, 1);
      out.valid(x, y) = t.in_bounds ? 1.0 : 0.0;
    }
  }
  return out;
}

FlowDifferenceGradient flow_difference_vjp(const FlowField& fwd, const FlowField& bwd,
                                           const Grid& upstream) {
  if (!fwd.same_shape(bwd) || !upstream.same_shape(fwd)) {
    throw DimensionError("flow_difference_vjp: shape mismatch");
  }
  const int w = fwd.width(), h = fwd.height();
  FlowDifferenceGradient g{Grid(w, h, 2), Grid(w, h, 2)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gu = upstream(x, y, 0);
      const double gv = upstream(x, y, 1);
      if (gu == 0.0 && gv == 0.0) continue;
      const BilinearTap t = make_tap(w, h, x + fwd.u(x, y), y + fwd.v(x, y));
      const auto du = interpolate_gradient(bwd, t, 0);
      const auto dv = interpolate_gradient(bwd, t, 1);
      g.d_fwd(x, y, 0) += gu * (1.0 + du[0]) + gv * dv[0];
      g.d_fwd(x, y, 1) += gu * du[1] + gv * (1.0 + dv[1]);
      scatter(g.d_bwd, t, 0, gu);
      scatter(g.d_bwd, t, 1, gv);
    }
  }
  return g;
}

Mask inlier_mask(const FlowDifference& diff, const FlowField& fwd,
                 const ConsistencyParams& params) {
  return classify(diff.delta, &diff.valid, fwd, params);
}

Mask inlier_mask(const FlowField& delta, const FlowField& fwd, const ConsistencyParams& params) {
  return classify(delta, nullptr, fwd, params);
}

}  // namespace geowarp
