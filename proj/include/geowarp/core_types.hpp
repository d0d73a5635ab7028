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
 * @file core_types.hpp
 * @brief Dense grid containers, pyramids and bilinear resampling.
 *
 * Coordinate convention: pixel (row i, column j) sits at continuous
 * coordinate (x = j, y = i); x grows rightward, y downward, origin at the
 * top-left pixel center. All storage is row-major with interleaved channels.
 */

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace geowarp {

/// Untyped row-major W x H x C grid of doubles. Used directly for gradients
/// and cotangents; the typed wrappers below add domain invariants.
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, int channels, double fill = 0.0);
  Grid(int width, int height, int channels, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y, int c = 0) noexcept {
    return data_[index(x, y, c)];
  }
  double operator()(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y, c)];
  }
  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  bool same_extent(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Intensities in [0,1], 1 or 3 channels. Values are clamped on construction.
class Image : public Grid {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  Image(int width, int height, int channels, std::vector<double> data);
  /// Clamps and validates an arbitrary grid.
  explicit Image(Grid grid);
};

/// Strictly positive finite depth, one channel.
class DepthMap : public Grid {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, double fill);
  DepthMap(int width, int height, std::vector<double> data);
  explicit DepthMap(Grid grid);
};

/// Per-pixel displacement in pixels, stored as interleaved (u, v).
class FlowField : public Grid {
 public:
  FlowField() = default;
  FlowField(int width, int height, double u = 0.0, double v = 0.0);
  explicit FlowField(Grid grid);

  double& u(int x, int y) noexcept { return (*this)(x, y, 0); }
  double& v(int x, int y) noexcept { return (*this)(x, y, 1); }
  double u(int x, int y) const noexcept { return (*this)(x, y, 0); }
  double v(int x, int y) const noexcept { return (*this)(x, y, 1); }
};

/// Per-pixel weight in [0,1]; hard masks use {0,1}.
class Mask : public Grid {
 public:
  Mask() = default;
  Mask(int width, int height, double fill = 1.0);
  explicit Mask(Grid grid);

  double sum() const noexcept;
  std::size_t count_nonzero() const noexcept;
};

FlowField operator+(const FlowField& a, const FlowField& b);
FlowField operator-(const FlowField& a, const FlowField& b);

/// Level 0 is full resolution; level l has floor(W / 2^l) x floor(H / 2^l).
template <class G>
struct Pyramid {
  std::vector<G> levels;

  std::size_t num_scales() const noexcept { return levels.size(); }
  const G& operator[](std::size_t level) const { return levels.at(level); }
  G& operator[](std::size_t level) { return levels.at(level); }
};

/// 2x2 average pooling of one level. Odd trailing rows/columns are dropped.
Grid downsample_average(const Grid& grid);

Pyramid<Image> build_pyramid(const Image& image, int num_scales);
Pyramid<DepthMap> build_pyramid(const DepthMap& depth, int num_scales);
/// Flow vectors are halved per level so they stay in level-local pixels.
Pyramid<FlowField> build_pyramid(const FlowField& flow, int num_scales);

/// Maps a level-(l+1) coordinate to the matching level-l coordinate under
/// 2x2 average pooling: a coarse pixel center covers fine centers 2j, 2j+1.
constexpr double fine_from_coarse(double coarse) noexcept {
  return 2.0 * coarse + 0.5;
}
constexpr double coarse_from_fine(double fine) noexcept {
  return 0.5 * (fine - 0.5);
}

/// Bilinear upsampling to an explicit finer size, sampling the coarse grid
/// at coarse_from_fine() of every fine pixel. Values are not rescaled.
Grid upsample_bilinear(const Grid& coarse, int width, int height);

/// Support of one bilinear lookup. `wx`/`wy` weight the (x1, y1) taps.
struct BilinearTap {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  double wx = 0.0;
  double wy = 0.0;
  bool in_bounds = true;
  // Coordinate was outside [0, W-1] (resp. [0, H-1]); its derivative is 0.
  bool clamped_x = false;
  bool clamped_y = false;
};

/// Computes the clamped cell for continuous (x, y). On exact integers the
/// cell to the right/below is used, except on the last column/row.
BilinearTap make_tap(int width, int height, double x, double y) noexcept;

inline double interpolate(const Grid& grid, const BilinearTap& t, int c) noexcept {
  const double top = (1.0 - t.wx) * grid(t.x0, t.y0, c) + t.wx * grid(t.x1, t.y0, c);
  const double bot = (1.0 - t.wx) * grid(t.x0, t.y1, c) + t.wx * grid(t.x1, t.y1, c);
  return (1.0 - t.wy) * top + t.wy * bot;
}

/// d(interpolate)/d(x, y); piecewise constant per cell, zero along clamped axes.
inline std::array<double, 2> interpolate_gradient(const Grid& grid, const BilinearTap& t,
                                                  int c) noexcept {
  const double v00 = grid(t.x0, t.y0, c);
  const double v10 = grid(t.x1, t.y0, c);
  const double v01 = grid(t.x0, t.y1, c);
  const double v11 = grid(t.x1, t.y1, c);
  double dx = 0.0;
  double dy = 0.0;
  if (!t.clamped_x && t.x1 != t.x0) {
    dx = (1.0 - t.wy) * (v10 - v00) + t.wy * (v11 - v01);
  }
  if (!t.clamped_y && t.y1 != t.y0) {
    dy = (1.0 - t.wx) * (v01 - v00) + t.wx * (v11 - v10);
  }
  return {dx, dy};
}

/// Adds `value` into the four taps of `t` with bilinear weights (adjoint of
/// interpolate()).
inline void scatter(Grid& grid, const BilinearTap& t, int c, double value) noexcept {
  grid(t.x0, t.y0, c) += (1.0 - t.wx) * (1.0 - t.wy) * value;
  grid(t.x1, t.y0, c) += t.wx * (1.0 - t.wy) * value;
  grid(t.x0, t.y1, c) += (1.0 - t.wx) * t.wy * value;
  grid(t.x1, t.y1, c) += t.wx * t.wy * value;
}

struct Sample {
  std::vector<double> value;  // one entry per channel
  bool in_bounds = true;
};

struct SampleGradient {
  std::vector<double> d_dx;  // per channel
  std::vector<double> d_dy;
};

/// Bilinear lookup with clamp-to-border; out-of-range coordinates are flagged.
Sample bilinear_sample(const Grid& grid, double x, double y);
SampleGradient bilinear_sample_gradient(const Grid& grid, double x, double y);

}  // namespace geowarp
