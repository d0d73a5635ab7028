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
 * @file synthetic_scenes.hpp
 * @brief Procedural multi-frame scenes with exact ground truth.
 *
 * World coordinates are those of the frame-0 camera, so poses[0] must be the
 * identity. poses[k] maps world points into camera k. The background is one
 * plane (fronto-parallel or slanted) optionally occluded by a fronto-parallel
 * foreground rectangle (two-layer layout). Every pixel is rendered by casting
 * its ray and evaluating an analytic texture on the surface it hits, so two
 * views of the same surface point agree exactly.
 *
 * Moving objects are image-space rectangles with their own texture. At frame
 * k an object covers x in [x0 + k vx - 0.5, x0 + k vx + w - 0.5) and likewise
 * in y, and later objects are drawn on top of earlier ones. Object pixels
 * report the background depth behind them; their full flow is the object
 * displacement and their residual is full minus rigid.
 */

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "geowarp/config.hpp"
#include "geowarp/core_types.hpp"
#include "geowarp/objective.hpp"
#include "geowarp/rigid_geometry.hpp"

namespace geowarp {

enum class SceneLayout { fronto_parallel, slanted, two_layer };

std::string to_string(SceneLayout layout);
SceneLayout parse_layout(const std::string& text);

/// value = amplitude * sin(2 pi (kx u + ky v) + phase + c * channel_shift)
struct Sinusoid {
  double amplitude = 0.1;
  double kx = 0.1;  // cycles per surface unit
  double ky = 0.1;
  double phase = 0.0;
  double channel_shift = 0.0;
};

struct Texture {
  double base = 0.5;
  std::vector<Sinusoid> waves;

  /// Intensity of channel c at surface coordinates (u, v).
  double evaluate(double u, double v, int c) const;
};

struct MovingObject {
  int x0 = 0;  // top-left pixel at frame 0
  int y0 = 0;
  int width = 1;
  int height = 1;
  double vx = 0.0;  // pixels per frame
  double vy = 0.0;
  Texture texture;  // in pixel units relative to the object corner
};

struct SceneSpec {
  int width = 96;
  int height = 64;
  int channels = 3;
  int num_frames = 2;
  CameraIntrinsics intrinsics{80.0, 80.0, 47.5, 31.5};
  SceneLayout layout = SceneLayout::fronto_parallel;
  double depth = 10.0;         // background depth on the world optical axis
  double slant_x = 0.0;        // dZ/dX of the background plane (slanted layout)
  double slant_y = 0.0;        // dZ/dY
  double foreground_depth = 5.0;
  std::array<int, 4> foreground_rect{32, 20, 64, 44};  // x0 y0 x1 y1, frame-0 pixels
  Texture texture;             // background; generated from the seed when empty
  Texture foreground_texture;  // generated from the seed when empty
  std::vector<PoseSE3> poses;  // world -> camera k; identity when empty
  std::vector<MovingObject> objects;  // object textures generated when empty
  std::uint64_t seed = 0;
  int texture_waves = 6;
  double min_period = 6.0;   // generated texture periods in pixels, log-uniform
  double max_period = 48.0;

  /// Throws InvalidSpecError naming the offending field.
  void validate() const;
};

/// Reads a spec from the `[scene]`, `[object.N]` and `[texture.*]` sections.
SceneSpec scene_spec_from_config(const Config& config);
/// Every field, including generated textures, in the same schema.
Config scene_spec_to_config(const SceneSpec& spec);
/// Fills empty textures and pose lists from the seed. Idempotent.
SceneSpec resolve_spec(const SceneSpec& spec);

/// Ground truth for one directed pair of frames.
struct PairTruth {
  DirectedPair pair;
  PoseSE3 pose;  // target camera -> source camera
  FlowField rigid;
  FlowField residual;
  FlowField full;
  Mask occlusion;  // 1 where the target surface point is hidden in the source
  Mask in_frame;   // 1 where p + full(p) lies inside the source image
};

struct Scene {
  SceneSpec spec;  // resolved
  std::vector<Image> frames;
  std::vector<DepthMap> depth;
  std::vector<Mask> object_masks;  // 1 where a moving object is visible
  std::vector<PairTruth> pairs;    // adjacent_pairs(num_frames) order

  const PairTruth& truth(int target, int source) const;
};

Scene generate_scene(const SceneSpec& spec);

/// Continuous renderer of a resolved spec; used by generation and checking.
class SceneRenderer {
 public:
  explicit SceneRenderer(SceneSpec spec);

  struct Hit {
    int layer = 0;    // 0 background, 1 foreground
    int object = -1;  // visible moving object, or -1
    double depth = 0.0;  // camera-frame z of the plane surface
    Point3D world = Point3D::Zero();
  };

  /// Surface visible at continuous pixel (x, y) of frame k.
  Hit hit(int frame, double x, double y) const;
  double intensity(int frame, double x, double y, int c) const;
  /// Rigid and full flow from frame `from` to frame `to` at continuous (x, y).
  Eigen::Vector2d rigid_flow_at(int from, int to, double x, double y) const;
  Eigen::Vector2d full_flow_at(int from, int to, double x, double y) const;
  /// Camera-frame point of a world point.
  Point3D to_camera(int frame, const Point3D& world) const;
  /// Index of the topmost object covering (x, y) at frame k, or -1.
  int object_at(int frame, double x, double y) const;

  const SceneSpec& spec() const noexcept { return spec_; }

 private:
  double plane_hit(const Point3D& origin, const Point3D& dir, int layer, Point3D* point) const;
  bool on_foreground(const Point3D& p) const;
  Point3D ray(int frame, double x, double y) const;

  SceneSpec spec_;
  std::vector<Eigen::Matrix3d> cam_to_world_;
  std::vector<Point3D> centers_;
  std::array<double, 4> fg_world_{};  // X0 Y0 X1 Y1 on the foreground plane
};

struct SelfCheckReport {
  bool passed = true;
  double max_photometric = 0.0;   // over non-occluded in-frame pixels
  double max_decomposition = 0.0;  // |full - rigid - residual|
  double max_rigid = 0.0;          // |rigid - rigid_flow(depth, pose, K)|
  double max_consistency = 0.0;    // forward-backward, non-occluded
  std::vector<std::string> failures;

  std::string to_text() const;
};

/// Verifies the ground truth of a generated scene against its own spec.
/// Tolerances: photometric and consistency 1e-6, rigid 1e-9, decomposition 1e-12.
SelfCheckReport scene_self_check(const Scene& scene);

/// Writes frames (PPM/PGM), depths (PFM), flows (.flo), masks (PGM), poses,
/// the resolved spec (scene.cfg) and a manifest listing every file.
void export_scene(const Scene& scene, const std::filesystem::path& dir);

/// Frames, depths, poses and flows of an exported scene. The spec is read
/// back from scene.cfg; frames carry 8-bit quantization.
Scene load_scene(const std::filesystem::path& dir);

/// File names used by export_scene.
std::string frame_file(int k, int channels);
std::string depth_file(int k);
std::string flow_file(const std::string& kind, const DirectedPair& p);
std::string occlusion_file(const DirectedPair& p);

}  // namespace geowarp
