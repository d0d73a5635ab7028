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

#include <cmath>

#include "doctest.h"
#include "geowarp/errors.hpp"
#include "geowarp/flow_viz.hpp"
#include "oracles.hpp"

using namespace geowarp;

namespace {

// Hue in [0, 6) of an RGB triple; undefined (returns -1) for grays.
double hue(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double c = mx - mn;
  if (c < 1e-9) return -1;
  double h = 0;
  if (mx == r) {
    h = std::fmod((g - b) / c + 6.0, 6.0);
  } else if (mx == g) {
    h = (b - r) / c + 2.0;
  } else {
    h = (r - g) / c + 4.0;
  }
  return h;
}

}  // namespace

TEST_SUITE("flow_viz") {
  TEST_CASE("zero flow is white") {
    const Image img = flow_to_color(FlowField(6, 4));
    CHECK(img.channels() == 3);
    for (double v : img.values()) CHECK(v == 1.0);
    FlowVizOptions abs;
    abs.normalization = FlowNormalization::absolute;
    const Image white = flow_to_color(FlowField(6, 4), abs);
    for (double v : white.values()) CHECK(v == 1.0);
  }

  TEST_CASE("uniform flow is one saturated color") {
    const Image img = flow_to_color(FlowField(5, 5, 2.0, -1.0));
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x)
        for (int c = 0; c < 3; ++c) CHECK(img(x, y, c) == img(0, 0, c));
    // Radius equals the magnitude, so the color sits on the wheel rim.
    const auto rim = flow_color(2.0 / std::sqrt(5.0), -1.0 / std::sqrt(5.0));
    for (int c = 0; c < 3; ++c) CHECK(img(0, 0, c) == doctest::Approx(rim[c]).epsilon(1e-12));
    CHECK(std::min({rim[0], rim[1], rim[2]}) < 0.05);
  }

  TEST_CASE("wheel reference directions") {
    // Rightward flow is red, leftward is cyan-ish, per the standard wheel.
    const auto right = flow_color(1.0, 0.0);
    CHECK(right[0] == doctest::Approx(1.0));
    CHECK(right[2] < 0.1);
    const auto left = flow_color(-1.0, 0.0);
    CHECK(left[0] < 0.1);
    CHECK(left[1] > 0.5);
    CHECK(left[2] > 0.5);
    const auto center = flow_color(0.0, 0.0);
    for (double v : center) CHECK(v == 1.0);
    const auto outside = flow_color(2.0, 0.0);
    CHECK(outside[0] == doctest::Approx(0.75));
  }

  TEST_CASE("global scale keeps hue under p99 normalization") {
    auto g = oracle::rng(110);
    const FlowField f(oracle::random_grid(g, 12, 10, 2, -4, 4));
    FlowField big = f;
    for (double& v : big.values()) v *= 6.5;
    const Image a = flow_to_color(f);
    const Image b = flow_to_color(big);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 12; ++x) {
        const double ha = hue(a(x, y, 0), a(x, y, 1), a(x, y, 2));
        const double hb = hue(b(x, y, 0), b(x, y, 1), b(x, y, 2));
        CHECK(ha == doctest::Approx(hb).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("p99 is a nearest-rank percentile") {
    FlowField f(100, 1);
    for (int x = 0; x < 100; ++x) f.u(x, 0) = x + 1;
    CHECK(flow_magnitude_p99(f) == 99.0);
  }

  TEST_CASE("absolute normalization") {
    FlowVizOptions o;
    o.normalization = FlowNormalization::absolute;
    o.max_flow = 4.0;
    const Image img = flow_to_color(FlowField(2, 2, 2.0, 0.0), o);
    const auto half = flow_color(0.5, 0.0);
    for (int c = 0; c < 3; ++c) CHECK(img(1, 1, c) == doctest::Approx(half[c]).epsilon(1e-12));
    o.max_flow = 0.0;
    CHECK_THROWS_AS(flow_to_color(FlowField(2, 2), o), DomainError);
  }
}
