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

#include "geowarp/flow_viz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "geowarp/errors.hpp"

namespace geowarp {

namespace {

// Color wheel segments: red-yellow, yellow-green, green-cyan, cyan-blue,
// blue-magenta, magenta-red.
constexpr int kRY = 15, kYG = 6, kGC = 4, kCB = 11, kBM = 13, kMR = 6;
constexpr int kWheelSize = kRY + kYG + kGC + kCB + kBM + kMR;

using Wheel = std::array<std::array<double, 3>, kWheelSize>;

Wheel make_wheel() {
  Wheel w{};
  int k = 0;
  auto ramp = [&](int n, int up, int down, int fixed) {
    for (int i = 0; i < n; ++i, ++k) {
      w[k] = {0.0, 0.0, 0.0};
      w[k][fixed] = 255.0;
      if (up >= 0) w[k][up] = std::floor(255.0 * i / n);
      if (down >= 0) w[k][down] = 255.0 - std::floor(255.0 * i / n);
    }
  };
  ramp(kRY, 1, -1, 0);  // R fixed, G up
  ramp(kYG, -1, 0, 1);  // G fixed, R down
  ramp(kGC, 2, -1, 1);  // G fixed, B up
  ramp(kCB, -1, 1, 2);  // B fixed, G down
  ramp(kBM, 0, -1, 2);  // B fixed, R up
  ramp(kMR, -1, 2, 0);  // R fixed, B down
  for (auto& c : w) {
    for (double& v : c) v /= 255.0;
  }
  return w;
}

const Wheel& wheel() {
  static const Wheel w = make_wheel();
  return w;
}

}  // namespace

std::array<double, 3> flow_color(double u, double v) {
  const double rad = std::hypot(u, v);
  const double a = std::atan2(-v, -u) / std::numbers::pi;
  const double fk = (a + 1.0) / 2.0 * (kWheelSize - 1);
  const int k0 = static_cast<int>(std::floor(fk));
  const int k1 = (k0 + 1) % kWheelSize;
  const double f = fk - k0;
  std::array<double, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double col = (1.0 - f) * wheel()[k0][c] + f * wheel()[k1][c];
    out[c] = rad <= 1.0 ? 1.0 - rad * (1.0 - col) : col * 0.75;
  }
  return out;
}

double flow_magnitude_p99(const FlowField& flow) {
  std::vector<double> mags;
  mags.reserve(flow.pixel_count());
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) mags.push_back(std::hypot(flow.u(x, y), flow.v(x, y)));
  }
  if (mags.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(mags.size())));
  const auto it = mags.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(rank, 1) - 1);
  std::nth_element(mags.begin(), it, mags.end());
  return *it;
}

Image flow_to_color(const FlowField& flow, const FlowVizOptions& options) {
  double radius = options.max_flow;
  if (options.normalization == FlowNormalization::p99) {
    radius = flow_magnitude_p99(flow);
  } else if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw DomainError("flow_to_color: max_flow must be positive");
  }
  Image out(flow.width(), flow.height(), 3, 1.0);
  if (radius <= 0.0) return out;
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const auto rgb = flow_color(flow.u(x, y) / radius, flow.v(x, y) / radius);
      for (int c = 0; c < 3; ++c) out(x, y, c) = rgb[c];
    }
  }
  return out;
}

}  // namespace geowarp
