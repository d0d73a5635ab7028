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

#include "geowarp/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geowarp/errors.hpp"

namespace geowarp {

namespace {

void check_extent(int width, int height, int channels) {
  if (width <= 0 || height <= 0 || channels <= 0) {
    throw DimensionError("grid extent must be positive, got " + std::to_string(width) +
                         "x" + std::to_string(height) + "x" + std::to_string(channels));
  }
}

void require_finite(const Grid& g, const char* what) {
  for (double v : g.values()) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " contains a non-finite value");
  }
}

template <class G>
Pyramid<G> build_levels(const G& base, int num_scales, double value_scale) {
  if (num_scales < 1) throw DomainError("num_scales must be >= 1");
  const int factor = 1 << (num_scales - 1);
  if (base.width() < factor || base.height() < factor) {
    throw DimensionError("grid " + std::to_string(base.width()) + "x" +
                         std::to_string(base.height()) + " too small for " +
                         std::to_string(num_scales) + " pyramid levels");
  }
  Pyramid<G> pyr;
  pyr.levels.reserve(static_cast<std::size_t>(num_scales));
  pyr.levels.push_back(base);
  for (int l = 1; l < num_scales; ++l) {
    Grid next = downsample_average(pyr.levels.back());
    if (value_scale != 1.0) {
      for (double& v : next.values()) v *= value_scale;
    }
    pyr.levels.push_back(G(std::move(next)));
  }
  return pyr;
}

}  // namespace

Grid::Grid(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  check_extent(width, height, channels);
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Grid::Grid(int width, int height, int channels, std::vector<double> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_extent(width, height, channels);
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(width) + "x" +
                         std::to_string(height) + "x" + std::to_string(channels));
  }
}

Image::Image(int width, int height, int channels, double fill)
    : Image(Grid(width, height, channels, fill)) {}

Image::Image(int width, int height, int channels, std::vector<double> data)
    : Image(Grid(width, height, channels, std::move(data))) {}

Image::Image(Grid grid) : Grid(std::move(grid)) {
  if (channels() != 1 && channels() != 3) {
    throw DimensionError("image must have 1 or 3 channels, got " + std::to_string(channels()));
  }
  require_finite(*this, "image");
  for (double& v : values()) v = std::clamp(v, 0.0, 1.0);
}

DepthMap::DepthMap(int width, int height, double fill)
    : DepthMap(Grid(width, height, 1, fill)) {}

DepthMap::DepthMap(int width, int height, std::vector<double> data)
    : DepthMap(Grid(width, height, 1, std::move(data))) {}

DepthMap::DepthMap(Grid grid) : Grid(std::move(grid)) {
  if (channels() != 1) throw DimensionError("depth map must have one channel");
  for (double v : values()) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw DomainError("depth must be strictly positive and finite");
    }
  }
}

FlowField::FlowField(int width, int height, double u, double v) : Grid(width, height, 2) {
  for (std::size_t i = 0; i < size(); i += 2) {
    values()[i] = u;
    values()[i + 1] = v;
  }
}

FlowField::FlowField(Grid grid) : Grid(std::move(grid)) {
  if (channels() != 2) throw DimensionError("flow field must have two channels");
  require_finite(*this, "flow field");
}

Mask::Mask(int width, int height, double fill) : Mask(Grid(width, height, 1, fill)) {}

Mask::Mask(Grid grid) : Grid(std::move(grid)) {
  if (channels() != 1) throw DimensionError("mask must have one channel");
  for (double v : values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("mask values must lie in [0,1]");
  }
}

double Mask::sum() const noexcept {
  double s = 0.0;
  for (double v : values()) s += v;
  return s;
}

std::size_t Mask::count_nonzero() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values().begin(), values().end(), [](double v) { return v != 0.0; }));
}

FlowField operator+(const FlowField& a, const FlowField& b) {
  if (!a.same_shape(b)) throw DimensionError("flow fields differ in shape");
  FlowField out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

FlowField operator-(const FlowField& a, const FlowField& b) {
  if (!a.same_shape(b)) throw DimensionError("flow fields differ in shape");
  FlowField out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= b.values()[i];
  return out;
}

Grid downsample_average(const Grid& grid) {
  const int w = grid.width() / 2;
  const int h = grid.height() / 2;
  if (w == 0 || h == 0) {
    throw DimensionError("cannot downsample a " + std::to_string(grid.width()) + "x" +
                         std::to_string(grid.height()) + " grid");
  }
  Grid out(w, h, grid.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < grid.channels(); ++c) {
        out(x, y, c) = 0.25 * (grid(2 * x, 2 * y, c) + grid(2 * x + 1, 2 * y, c) +
                               grid(2 * x, 2 * y + 1, c) + grid(2 * x + 1, 2 * y + 1, c));
      }
    }
  }
  return out;
}

Pyramid<Image> build_pyramid(const Image& image, int num_scales) {
  return build_levels(image, num_scales, 1.0);
}

Pyramid<DepthMap> build_pyramid(const DepthMap& depth, int num_scales) {
  return build_levels(depth, num_scales, 1.0);
}

Pyramid<FlowField> build_pyramid(const FlowField& flow, int num_scales) {
  return build_levels(flow, num_scales, 0.5);
}

Grid upsample_bilinear(const Grid& coarse, int width, int height) {
  Grid out(width, height, coarse.channels());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const BilinearTap t =
          make_tap(coarse.width(), coarse.height(), coarse_from_fine(x), coarse_from_fine(y));
      for (int c = 0; c < coarse.channels(); ++c) out(x, y, c) = interpolate(coarse, t, c);
    }
  }
  return out;
}

BilinearTap make_tap(int width, int height, double x, double y) noexcept {
  BilinearTap t;
  const double max_x = static_cast<double>(width - 1);
  const double max_y = static_cast<double>(height - 1);
  t.clamped_x = !(x >= 0.0 && x <= max_x);
  t.clamped_y = !(y >= 0.0 && y <= max_y);
  t.in_bounds = !t.clamped_x && !t.clamped_y;
  // NaN coordinates fall through to the low border.
  const double xc = t.clamped_x ? (x > max_x ? max_x : 0.0) : x;
  const double yc = t.clamped_y ? (y > max_y ? max_y : 0.0) : y;

  t.x0 = std::min(static_cast<int>(std::floor(xc)), std::max(width - 2, 0));
  t.y0 = std::min(static_cast<int>(std::floor(yc)), std::max(height - 2, 0));
  t.x1 = std::min(t.x0 + 1, width - 1);
  t.y1 = std::min(t.y0 + 1, height - 1);
  t.wx = t.x1 == t.x0 ? 0.0 : xc - t.x0;
  t.wy = t.y1 == t.y0 ? 0.0 : yc - t.y0;
  return t;
}

Sample bilinear_sample(const Grid& grid, double x, double y) {
  if (grid.empty()) throw DimensionError("cannot sample an empty grid");
  const BilinearTap t = make_tap(grid.width(), grid.height(), x, y);
  Sample s;
  s.in_bounds = t.in_bounds;
  s.value.resize(static_cast<std::size_t>(grid.channels()));
  for (int c = 0; c < grid.channels(); ++c) s.value[c] = interpolate(grid, t, c);
  return s;
}

SampleGradient bilinear_sample_gradient(const Grid& grid, double x, double y) {
  if (grid.empty()) throw DimensionError("cannot sample an empty grid");
  const BilinearTap t = make_tap(grid.width(), grid.height(), x, y);
  SampleGradient g;
  g.d_dx.resize(static_cast<std::size_t>(grid.channels()));
  g.d_dy.resize(static_cast<std::size_t>(grid.channels()));
  for (int c = 0; c < grid.channels(); ++c) {
    const auto d = interpolate_gradient(grid, t, c);
    g.d_dx[c] = d[0];
    g.d_dy[c] = d[1];
  }
  return g;
}

}  // namespace geowarp
