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

#include "geowarp/synthetic_scenes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "geowarp/errors.hpp"
#include "geowarp/io.hpp"

namespace geowarp {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMaxFrequency = 0.25;  // cycles per pixel, i.e. period >= 4 px
constexpr double kMinSceneDepth = 0.1;
constexpr double kMaxSceneDepth = 100.0;

// Portable uniform [0, 1) from the raw 64-bit engine output.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

std::mt19937_64 texture_rng(std::uint64_t seed, std::uint32_t role) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    role};
  return std::mt19937_64(seq);
}

// Waves with image-space periods log-uniform in [min_period, max_period]
// pixels, where one surface unit spans `pixels_per_unit` pixels.
Texture random_texture(std::mt19937_64& rng, int waves, double min_period, double max_period,
                       double pixels_per_unit) {
  Texture t;
  t.base = 0.5;
  const double budget = 0.4 / waves;
  for (int i = 0; i < waves; ++i) {
    Sinusoid s;
    const double period =
        std::exp(uniform(rng, std::log(min_period), std::log(max_period)));
    const double quadrant = (rng() & 1U) != 0 ? std::numbers::pi / 2 : 0.0;
    const double theta = quadrant + uniform(rng, 15.0, 75.0) * std::numbers::pi / 180.0;
    const double k = pixels_per_unit / period;
    s.kx = k * std::cos(theta);
    s.ky = k * std::sin(theta);
    s.amplitude = budget * uniform(rng, 0.6, 1.0);
    s.phase = uniform(rng, 0.0, kTwoPi);
    s.channel_shift = uniform(rng, 0.0, kTwoPi);
    t.waves.push_back(s);
  }
  return t;
}

void validate_texture(const Texture& t, const std::string& field) {
  if (t.waves.empty()) return;  // generated later
  if (t.waves.size() < 3) throw InvalidSpecError(field, "needs at least 3 waves");
  double span = 0.0;
  for (std::size_t i = 0; i < t.waves.size(); ++i) {
    const Sinusoid& s = t.waves[i];
    const std::string f = field + ".wave." + std::to_string(i);
    if (!std::isfinite(s.amplitude) || !std::isfinite(s.kx) || !std::isfinite(s.ky) ||
        !std::isfinite(s.phase) || !std::isfinite(s.channel_shift)) {
      throw InvalidSpecError(f, "non-finite value");
    }
    if (s.kx == 0.0 || s.ky == 0.0) throw InvalidSpecError(f, "wave must not be axis-aligned");
    span += std::abs(s.amplitude);
  }
  if (!std::isfinite(t.base) || t.base - span < 0.0 || t.base + span > 1.0) {
    throw InvalidSpecError(field + ".base", "texture range leaves [0, 1]");
  }
}

std::string join(std::initializer_list<double> values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ' ';
    out += io::format_double(v);
  }
  return out;
}

Texture texture_from_config(const Config& cfg, const std::string& section) {
  Texture t;
  if (!cfg.has_section(section)) return t;
  t.base = cfg.get_double(section, "base", 0.5);
  for (int i = 0; cfg.has(section, "wave." + std::to_string(i)); ++i) {
    const auto v = cfg.get_doubles(section, "wave." + std::to_string(i), 5);
    t.waves.push_back({v[0], v[1], v[2], v[3], v[4]});
  }
  return t;
}

void texture_to_config(Config& cfg, const std::string& section, const Texture& t) {
  cfg.set(section, "base", io::format_double(t.base));
  for (std::size_t i = 0; i < t.waves.size(); ++i) {
    const Sinusoid& s = t.waves[i];
    cfg.set(section, "wave." + std::to_string(i),
            join({s.amplitude, s.kx, s.ky, s.phase, s.channel_shift}));
  }
}

int as_int(double v, const std::string& field) {
  if (v != std::floor(v) || std::abs(v) > 1e9) throw InvalidSpecError(field, "not an integer");
  return static_cast<int>(v);
}

bool is_identity(const PoseSE3& p) {
  return p.rotation == std::array<double, 3>{0.0, 0.0, 0.0} && p.translation.isZero(0.0);
}

std::string pad3(int k) {
  std::string s = std::to_string(k);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

}  // namespace

std::string to_string(SceneLayout layout) {
  switch (layout) {
    case SceneLayout::fronto_parallel: return "fronto";
    case SceneLayout::slanted: return "slanted";
    case SceneLayout::two_layer: return "two_layer";
  }
  return "fronto";
}

SceneLayout parse_layout(const std::string& text) {
  if (text == "fronto") return SceneLayout::fronto_parallel;
  if (text == "slanted") return SceneLayout::slanted;
  if (text == "two_layer") return SceneLayout::two_layer;
  throw InvalidSpecError("scene.layout", "expected fronto, slanted or two_layer, got '" + text + "'");
}

double Texture::evaluate(double u, double v, int c) const {
  double value = base;
  for (const Sinusoid& s : waves) {
    value += s.amplitude * std::sin(kTwoPi * (s.kx * u + s.ky * v) + s.phase + c * s.channel_shift);
  }
  return value;
}

void SceneSpec::validate() const {
  if (width < 2 || width > 8192) throw InvalidSpecError("scene.width", "must be in [2, 8192]");
  if (height < 2 || height > 8192) throw InvalidSpecError("scene.height", "must be in [2, 8192]");
  if (channels != 1 && channels != 3) throw InvalidSpecError("scene.channels", "must be 1 or 3");
  if (num_frames < 2 || num_frames > 1000) {
    throw InvalidSpecError("scene.frames", "must be in [2, 1000]");
  }
  try {
    intrinsics.validate();
  } catch (const DomainError& e) {
    throw InvalidSpecError("scene.intrinsics", e.what());
  }
  if (!std::isfinite(depth) || depth < kMinSceneDepth || depth > kMaxSceneDepth) {
    throw InvalidSpecError("scene.depth", "must be in [0.1, 100]");
  }
  if (!std::isfinite(slant_x) || !std::isfinite(slant_y)) {
    throw InvalidSpecError("scene.slant", "non-finite value");
  }
  if (layout == SceneLayout::two_layer) {
    if (!std::isfinite(foreground_depth) || foreground_depth < kMinSceneDepth ||
        foreground_depth >= depth) {
      throw InvalidSpecError("scene.foreground_depth", "must be in [0.1, depth)");
    }
    const auto [x0, y0, x1, y1] = foreground_rect;
    if (x0 < 0 || y0 < 0 || x1 > width || y1 > height || x0 >= x1 || y0 >= y1) {
      throw InvalidSpecError("scene.foreground_rect", "must be a nonempty region inside the image");
    }
  }
  if (!poses.empty()) {
    if (static_cast<int>(poses.size()) != num_frames) {
      throw InvalidSpecError("scene.pose", "one pose per frame required");
    }
    if (!is_identity(poses[0])) throw InvalidSpecError("scene.pose.0", "must be the identity");
    for (std::size_t k = 0; k < poses.size(); ++k) {
      for (double v : poses[k].to_vector()) {
        if (!std::isfinite(v)) {
          throw InvalidSpecError("scene.pose." + std::to_string(k), "non-finite value");
        }
      }
    }
  }
  if (texture_waves < 3 || texture_waves > 64) {
    throw InvalidSpecError("scene.texture_waves", "must be in [3, 64]");
  }
  if (!(min_period >= 1.0 / kMaxFrequency) || !(max_period >= min_period) ||
      !std::isfinite(max_period)) {
    throw InvalidSpecError("scene.period", "need 4 <= min <= max");
  }
  validate_texture(texture, "texture.background");
  validate_texture(foreground_texture, "texture.foreground");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const MovingObject& o = objects[i];
    const std::string f = "object." + std::to_string(i);
    if (o.width < 1 || o.height < 1 || o.x0 < 0 || o.y0 < 0 || o.x0 + o.width > width ||
        o.y0 + o.height > height) {
      throw InvalidSpecError(f + ".rect", "region must lie inside the image at frame 0");
    }
    if (!std::isfinite(o.vx) || !std::isfinite(o.vy)) {
      throw InvalidSpecError(f + ".velocity", "non-finite value");
    }
    validate_texture(o.texture, "texture." + f);
    for (std::size_t w = 0; w < o.texture.waves.size(); ++w) {
      const Sinusoid& s = o.texture.waves[w];
      if (std::hypot(s.kx, s.ky) > kMaxFrequency) {
        throw InvalidSpecError("texture." + f + ".wave." + std::to_string(w),
                               "period below 4 px");
      }
    }
  }
}

SceneSpec scene_spec_from_config(const Config& cfg) {
  const std::string S = "scene";
  SceneSpec s;
  s.width = static_cast<int>(cfg.get_int(S, "width", s.width));
  s.height = static_cast<int>(cfg.get_int(S, "height", s.height));
  s.channels = static_cast<int>(cfg.get_int(S, "channels", s.channels));
  s.num_frames = static_cast<int>(cfg.get_int(S, "frames", s.num_frames));
  if (cfg.has(S, "intrinsics")) {
    const auto k = cfg.get_doubles(S, "intrinsics", 4);
    s.intrinsics = {k[0], k[1], k[2], k[3]};
  } else {
    s.intrinsics = {80.0, 80.0, (s.width - 1) / 2.0, (s.height - 1) / 2.0};
  }
  s.layout = parse_layout(cfg.get_string(S, "layout", "fronto"));
  s.depth = cfg.get_double(S, "depth", s.depth);
  if (cfg.has(S, "slant")) {
    const auto v = cfg.get_doubles(S, "slant", 2);
    s.slant_x = v[0];
    s.slant_y = v[1];
  }
  s.foreground_depth = cfg.get_double(S, "foreground_depth", s.foreground_depth);
  if (cfg.has(S, "foreground_rect")) {
    const auto v = cfg.get_doubles(S, "foreground_rect", 4);
    for (int i = 0; i < 4; ++i) s.foreground_rect[i] = as_int(v[i], "scene.foreground_rect");
  }
  if (cfg.has(S, "seed")) {
    const std::string text = cfg.get_string(S, "seed");
    std::uint64_t seed = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw InvalidSpecError("scene.seed", "not an unsigned integer: " + text);
    }
    s.seed = seed;
  }
  s.texture_waves = static_cast<int>(cfg.get_int(S, "texture_waves", s.texture_waves));
  if (cfg.has(S, "period")) {
    const auto v = cfg.get_doubles(S, "period", 2);
    s.min_period = v[0];
    s.max_period = v[1];
  }
  bool any_pose = false;
  std::vector<PoseSE3> poses(std::max(s.num_frames, 0));
  for (int k = 0; k < s.num_frames; ++k) {
    const std::string key = "pose." + std::to_string(k);
    if (!cfg.has(S, key)) continue;
    any_pose = true;
    const auto v = cfg.get_doubles(S, key, 6);
    poses[k] = PoseSE3::from_vector({v[0], v[1], v[2], v[3], v[4], v[5]});
  }
  if (any_pose) s.poses = poses;
  s.texture = texture_from_config(cfg, "texture.background");
  s.foreground_texture = texture_from_config(cfg, "texture.foreground");
  for (int i = 0; cfg.has_section("object." + std::to_string(i)); ++i) {
    const std::string sec = "object." + std::to_string(i);
    MovingObject o;
    const auto r = cfg.get_doubles(sec, "rect", 4);
    o.x0 = as_int(r[0], sec + ".rect");
    o.y0 = as_int(r[1], sec + ".rect");
    o.width = as_int(r[2], sec + ".rect");
    o.height = as_int(r[3], sec + ".rect");
    const auto v = cfg.get_doubles(sec, "velocity", 2);
    o.vx = v[0];
    o.vy = v[1];
    o.texture = texture_from_config(cfg, "texture." + sec);
    s.objects.push_back(o);
  }
  return s;
}

Config scene_spec_to_config(const SceneSpec& s) {
  Config cfg;
  const std::string S = "scene";
  cfg.set(S, "width", std::to_string(s.width));
  cfg.set(S, "height", std::to_string(s.height));
  cfg.set(S, "channels", std::to_string(s.channels));
  cfg.set(S, "frames", std::to_string(s.num_frames));
  cfg.set(S, "intrinsics",
          join({s.intrinsics.fx, s.intrinsics.fy, s.intrinsics.cx, s.intrinsics.cy}));
  cfg.set(S, "layout", to_string(s.layout));
  cfg.set(S, "depth", io::format_double(s.depth));
  cfg.set(S, "slant", join({s.slant_x, s.slant_y}));
  cfg.set(S, "foreground_depth", io::format_double(s.foreground_depth));
  const auto& r = s.foreground_rect;
  cfg.set(S, "foreground_rect", std::to_string(r[0]) + " " + std::to_string(r[1]) + " " +
                                    std::to_string(r[2]) + " " + std::to_string(r[3]));
  cfg.set(S, "seed", std::to_string(s.seed));
  cfg.set(S, "texture_waves", std::to_string(s.texture_waves));
  cfg.set(S, "period", join({s.min_period, s.max_period}));
  for (std::size_t k = 0; k < s.poses.size(); ++k) {
    const PoseVector v = s.poses[k].to_vector();
    cfg.set(S, "pose." + std::to_string(k), join({v[0], v[1], v[2], v[3], v[4], v[5]}));
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const MovingObject& o = s.objects[i];
    const std::string sec = "object." + std::to_string(i);
    cfg.set(sec, "rect", std::to_string(o.x0) + " " + std::to_string(o.y0) + " " +
                             std::to_string(o.width) + " " + std::to_string(o.height));
    cfg.set(sec, "velocity", join({o.vx, o.vy}));
  }
  if (!s.texture.waves.empty()) texture_to_config(cfg, "texture.background", s.texture);
  if (!s.foreground_texture.waves.empty()) {
    texture_to_config(cfg, "texture.foreground", s.foreground_texture);
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (!s.objects[i].texture.waves.empty()) {
      texture_to_config(cfg, "texture.object." + std::to_string(i), s.objects[i].texture);
    }
  }
  return cfg;
}

SceneSpec resolve_spec(const SceneSpec& spec) {
  spec.validate();
  SceneSpec s = spec;
  if (s.poses.empty()) s.poses.assign(s.num_frames, PoseSE3::identity());
  const double fx = s.intrinsics.fx;
  if (s.texture.waves.empty()) {
    auto rng = texture_rng(s.seed, 1);
    s.texture = random_texture(rng, s.texture_waves, s.min_period, s.max_period, fx / s.depth);
  }
  if (s.foreground_texture.waves.empty()) {
    auto rng = texture_rng(s.seed, 2);
    s.foreground_texture = random_texture(rng, s.texture_waves, s.min_period, s.max_period,
                                          fx / s.foreground_depth);
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (!s.objects[i].texture.waves.empty()) continue;
    auto rng = texture_rng(s.seed, 16 + static_cast<std::uint32_t>(i));
    s.objects[i].texture = random_texture(rng, s.texture_waves, s.min_period, s.max_period, 1.0);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Renderer

SceneRenderer::SceneRenderer(SceneSpec spec) : spec_(std::move(spec)) {
  if (static_cast<int>(spec_.poses.size()) != spec_.num_frames) {
    throw InvalidSpecError("scene.pose", "renderer needs a resolved spec");
  }
  for (const PoseSE3& p : spec_.poses) {
    const Eigen::Matrix3d rt = p.rotation_matrix().transpose();
    cam_to_world_.push_back(rt);
    centers_.push_back(-rt * p.translation);
  }
  const CameraIntrinsics& k = spec_.intrinsics;
  const double z = spec_.foreground_depth;
  const auto& r = spec_.foreground_rect;
  fg_world_ = {(r[0] - 0.5 - k.cx) * z / k.fx, (r[1] - 0.5 - k.cy) * z / k.fy,
               (r[2] - 0.5 - k.cx) * z / k.fx, (r[3] - 0.5 - k.cy) * z / k.fy};
}

Point3D SceneRenderer::ray(int frame, double x, double y) const {
  const CameraIntrinsics& k = spec_.intrinsics;
  return cam_to_world_[frame] * Point3D((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
}

Point3D SceneRenderer::to_camera(int frame, const Point3D& world) const {
  return spec_.poses[frame].apply(world);
}

double SceneRenderer::plane_hit(const Point3D& origin, const Point3D& dir, int layer,
                                Point3D* point) const {
  Point3D n;
  double offset = 0.0;
  if (layer == 0) {
    const bool slanted = spec_.layout == SceneLayout::slanted;
    n = Point3D(slanted ? -spec_.slant_x : 0.0, slanted ? -spec_.slant_y : 0.0, 1.0);
    offset = spec_.depth;
  } else {
    n = Point3D(0.0, 0.0, 1.0);
    offset = spec_.foreground_depth;
  }
  const double denom = n.dot(dir);
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double lambda = (offset - n.dot(origin)) / denom;
  if (point != nullptr) *point = origin + lambda * dir;
  return lambda;
}

bool SceneRenderer::on_foreground(const Point3D& p) const {
  return p.x() >= fg_world_[0] && p.x() < fg_world_[2] && p.y() >= fg_world_[1] &&
         p.y() < fg_world_[3];
}

SceneRenderer::Hit SceneRenderer::hit(int frame, double x, double y) const {
  const Point3D dir = ray(frame, x, y);
  const Point3D& origin = centers_[frame];
  Hit h;
  h.object = object_at(frame, x, y);
  h.depth = plane_hit(origin, dir, 0, &h.world);
  if (spec_.layout == SceneLayout::two_layer) {
    Point3D fg;
    const double z = plane_hit(origin, dir, 1, &fg);
    if (z > 0.0 && z < h.depth && on_foreground(fg)) {
      h.layer = 1;
      h.depth = z;
      h.world = fg;
    }
  }
  return h;
}

int SceneRenderer::object_at(int frame, double x, double y) const {
  for (int i = static_cast<int>(spec_.objects.size()) - 1; i >= 0; --i) {
    const MovingObject& o = spec_.objects[i];
    const double ox = o.x0 + frame * o.vx - 0.5;
    const double oy = o.y0 + frame * o.vy - 0.5;
    if (x >= ox && x < ox + o.width && y >= oy && y < oy + o.height) return i;
  }
  return -1;
}

double SceneRenderer::intensity(int frame, double x, double y, int c) const {
  const int obj = object_at(frame, x, y);
  if (obj >= 0) {
    const MovingObject& o = spec_.objects[obj];
    return o.texture.evaluate(x - (o.x0 + frame * o.vx), y - (o.y0 + frame * o.vy), c);
  }
  const Hit h = hit(frame, x, y);
  const Texture& t = h.layer == 1 ? spec_.foreground_texture : spec_.texture;
  return t.evaluate(h.world.x(), h.world.y(), c);
}

Eigen::Vector2d SceneRenderer::rigid_flow_at(int from, int to, double x, double y) const {
  const Hit h = hit(from, x, y);
  const Projection q = project(to_camera(to, h.world), spec_.intrinsics);
  return {q.x - x, q.y - y};
}

Eigen::Vector2d SceneRenderer::full_flow_at(int from, int to, double x, double y) const {
  const int obj = object_at(from, x, y);
  if (obj >= 0) {
    const MovingObject& o = spec_.objects[obj];
    return {(to - from) * o.vx, (to - from) * o.vy};
  }
  return rigid_flow_at(from, to, x, y);
}

// ---------------------------------------------------------------------------
// Generation

namespace {

// Largest image-space frequency (cycles/px) of a layer texture at pixel (x, y),
// from central differences of the surface coordinates.
template <class Surface>
double local_frequency(const Texture& t, int frame, double x, double y, int layer,
                       const Surface& surf) {
  const Point3D px0 = surf(frame, x - 0.5, y, layer);
  const Point3D px1 = surf(frame, x + 0.5, y, layer);
  const Point3D py0 = surf(frame, x, y - 0.5, layer);
  const Point3D py1 = surf(frame, x, y + 0.5, layer);
  double worst = 0.0;
  for (const Sinusoid& s : t.waves) {
    const double fx = s.kx * (px1.x() - px0.x()) + s.ky * (px1.y() - px0.y());
    const double fy = s.kx * (py1.x() - py0.x()) + s.ky * (py1.y() - py0.y());
    worst = std::max(worst, std::hypot(fx, fy));
  }
  return worst;
}

}  // namespace

const PairTruth& Scene::truth(int target, int source) const {
  for (const PairTruth& p : pairs) {
    if (p.pair.target == target && p.pair.source == source) return p;
  }
  throw DomainError("scene has no pair (" + std::to_string(target) + ", " +
                    std::to_string(source) + ")");
}

Scene generate_scene(const SceneSpec& input) {
  const SceneSpec spec = resolve_spec(input);
  const SceneRenderer renderer(spec);
  const int w = spec.width;
  const int h = spec.height;

  Scene scene;
  scene.spec = spec;

  const auto surface = [&](int frame, double x, double y, int layer) {
    const CameraIntrinsics& k = spec.intrinsics;
    const Eigen::Matrix3d rt = spec.poses[frame].rotation_matrix().transpose();
    const Point3D dir = rt * Point3D((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
    const Point3D origin = -rt * spec.poses[frame].translation;
    const Point3D n = layer == 1 || spec.layout != SceneLayout::slanted
                          ? Point3D(0.0, 0.0, 1.0)
                          : Point3D(-spec.slant_x, -spec.slant_y, 1.0);
    const double offset = layer == 1 ? spec.foreground_depth : spec.depth;
    return Point3D(origin + (offset - n.dot(origin)) / n.dot(dir) * dir);
  };

  for (int f = 0; f < spec.num_frames; ++f) {
    Image image(w, h, spec.channels);
    std::vector<double> depth(static_cast<std::size_t>(w) * h);
    Mask objects(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const SceneRenderer::Hit hit = renderer.hit(f, x, y);
        if (!std::isfinite(hit.depth) || hit.depth < kMinSceneDepth ||
            hit.depth > kMaxSceneDepth) {
          throw InvalidSpecError("scene.layout",
                                 "surface depth outside [0.1, 100] at frame " + std::to_string(f) +
                                     " pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                                     ")");
        }
        if (hit.object < 0) {
          const Texture& t = hit.layer == 1 ? spec.foreground_texture : spec.texture;
          if (local_frequency(t, f, x, y, hit.layer, surface) > kMaxFrequency) {
            throw InvalidSpecError(hit.layer == 1 ? "texture.foreground" : "texture.background",
                                   "image-space period below 4 px at frame " + std::to_string(f));
          }
        }
        depth[static_cast<std::size_t>(y) * w + x] = hit.depth;
        objects(x, y) = hit.object >= 0 ? 1.0 : 0.0;
        for (int c = 0; c < spec.channels; ++c) {
          const double v = renderer.intensity(f, x, y, c);
          if (v < 0.0 || v > 1.0) {
            throw InvalidSpecError("texture", "intensity leaves [0, 1]");
          }
          image(x, y, c) = v;
        }
      }
    }
    scene.frames.push_back(std::move(image));
    scene.depth.emplace_back(w, h, std::move(depth));
    scene.object_masks.push_back(std::move(objects));
  }

  for (const DirectedPair& p : adjacent_pairs(spec.num_frames)) {
    PairTruth t;
    t.pair = p;
    t.pose = compose(spec.poses[p.source], pose_inverse(spec.poses[p.target]));
    t.rigid = FlowField(w, h);
    t.residual = FlowField(w, h);
    t.full = FlowField(w, h);
    t.occlusion = Mask(w, h, 0.0);
    t.in_frame = Mask(w, h, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const SceneRenderer::Hit hit = renderer.hit(p.target, x, y);
        const Projection q = project(renderer.to_camera(p.source, hit.world), spec.intrinsics);
        const double ru = q.x - x;
        const double rv = q.y - y;
        const Eigen::Vector2d full = renderer.full_flow_at(p.target, p.source, x, y);
        t.rigid.u(x, y) = ru;
        t.rigid.v(x, y) = rv;
        t.full.u(x, y) = full.x();
        t.full.v(x, y) = full.y();
        t.residual.u(x, y) = full.x() - ru;
        t.residual.v(x, y) = full.y() - rv;

        const double qx = x + full.x();
        const double qy = y + full.y();
        if (qx < 0.0 || qx > w - 1 || qy < 0.0 || qy > h - 1) continue;
        t.in_frame(x, y) = 1.0;
        bool occluded = false;
        if (hit.object >= 0) {
          occluded = renderer.object_at(p.source, qx, qy) != hit.object;
        } else if (!q.in_front || renderer.object_at(p.source, qx, qy) >= 0) {
          occluded = true;
        } else {
          occluded = renderer.hit(p.source, qx, qy).layer != hit.layer;
        }
        t.occlusion(x, y) = occluded ? 1.0 : 0.0;
      }
    }
    scene.pairs.push_back(std::move(t));
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Self check

std::string SelfCheckReport::to_text() const {
  std::ostringstream out;
  out << "passed = " << (passed ? "true" : "false") << "\n";
  out << "max_photometric = " << io::format_double(max_photometric) << "\n";
  out << "max_decomposition = " << io::format_double(max_decomposition) << "\n";
  out << "max_rigid = " << io::format_double(max_rigid) << "\n";
  out << "max_consistency = " << io::format_double(max_consistency) << "\n";
  for (const std::string& f : failures) out << "failure = " << f << "\n";
  return out.str();
}

SelfCheckReport scene_self_check(const Scene& scene) {
  SelfCheckReport report;
  const SceneRenderer renderer(scene.spec);
  const int w = scene.spec.width;
  const int h = scene.spec.height;
  for (const PairTruth& t : scene.pairs) {
    const DirectedPair p = t.pair;
    const RigidFlow op = rigid_flow(scene.depth[p.target], t.pose, scene.spec.intrinsics);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 2; ++c) {
          const double d = std::abs(t.full(x, y, c) - (t.rigid(x, y, c) + t.residual(x, y, c)));
          report.max_decomposition = std::max(report.max_decomposition, d);
          if (op.valid(x, y) > 0.0) {
            report.max_rigid =
                std::max(report.max_rigid, std::abs(t.rigid(x, y, c) - op.flow(x, y, c)));
          }
        }
        if (t.in_frame(x, y) == 0.0 || t.occlusion(x, y) != 0.0) continue;
        const double qx = x + t.full.u(x, y);
        const double qy = y + t.full.v(x, y);
        for (int c = 0; c < scene.spec.channels; ++c) {
          const double r = std::abs(scene.frames[p.target](x, y, c) -
                                    renderer.intensity(p.source, qx, qy, c));
          report.max_photometric = std::max(report.max_photometric, r);
        }
        const Eigen::Vector2d back = renderer.full_flow_at(p.source, p.target, qx, qy);
        report.max_consistency =
            std::max(report.max_consistency,
                     std::hypot(t.full.u(x, y) + back.x(), t.full.v(x, y) + back.y()));
      }
    }
  }
  const auto check = [&](double value, double tol, const std::string& name) {
    if (!(value < tol)) {
      report.passed = false;
      report.failures.push_back(name + " " + io::format_double(value) + " >= " +
                                io::format_double(tol));
    }
  };
  check(report.max_photometric, 1e-6, "photometric residual");
  check(report.max_decomposition, 1e-12, "full = rigid + residual");
  check(report.max_rigid, 1e-9, "rigid flow vs rigid_flow(depth, pose, K)");
  check(report.max_consistency, 1e-6, "forward-backward consistency");
  return report;
}

// ---------------------------------------------------------------------------
// Files

std::string frame_file(int k, int channels) {
  return "frame_" + pad3(k) + (channels == 1 ? ".pgm" : ".ppm");
}

std::string depth_file(int k) { return "depth_" + pad3(k) + ".pfm"; }

std::string flow_file(const std::string& kind, const DirectedPair& p) {
  return "flow_" + kind + "_" + std::to_string(p.target) + "_" + std::to_string(p.source) + ".flo";
}

std::string occlusion_file(const DirectedPair& p) {
  return "occlusion_" + std::to_string(p.target) + "_" + std::to_string(p.source) + ".pgm";
}

namespace {

std::string in_frame_file(const DirectedPair& p) {
  return "inframe_" + std::to_string(p.target) + "_" + std::to_string(p.source) + ".pgm";
}

std::string object_file(int k) { return "objects_" + pad3(k) + ".pgm"; }

}  // namespace

void export_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  Config manifest;
  const auto add = [&](const std::string& key, const std::string& file) {
    manifest.set("files", key, file);
  };
  for (int k = 0; k < static_cast<int>(scene.frames.size()); ++k) {
    const std::string f = frame_file(k, scene.spec.channels);
    io::write_pnm(dir / f, scene.frames[k]);
    add("frame." + std::to_string(k), f);
    io::write_pfm(dir / depth_file(k), scene.depth[k]);
    add("depth." + std::to_string(k), depth_file(k));
    io::write_mask(dir / object_file(k), scene.object_masks[k]);
    add("objects." + std::to_string(k), object_file(k));
  }
  std::vector<Matrix34> poses;
  for (const PairTruth& t : scene.pairs) {
    const std::string tag = std::to_string(t.pair.target) + "_" + std::to_string(t.pair.source);
    for (const auto& [kind, flow] : {std::pair<std::string, const FlowField*>{"rigid", &t.rigid},
                                     {"residual", &t.residual},
                                     {"full", &t.full}}) {
      io::write_flo(dir / flow_file(kind, t.pair), *flow);
      add("flow_" + kind + "." + tag, flow_file(kind, t.pair));
    }
    io::write_mask(dir / occlusion_file(t.pair), t.occlusion);
    add("occlusion." + tag, occlusion_file(t.pair));
    io::write_mask(dir / in_frame_file(t.pair), t.in_frame);
    add("inframe." + tag, in_frame_file(t.pair));
    poses.push_back(t.pose.matrix());
  }
  io::write_poses(dir / "poses.txt", poses);
  add("poses", "poses.txt");
  std::vector<Matrix34> trajectory;
  for (const PoseSE3& p : scene.spec.poses) trajectory.push_back(p.matrix());
  io::write_poses(dir / "trajectory.txt", trajectory);
  add("trajectory", "trajectory.txt");
  const std::string spec_text = scene_spec_to_config(scene.spec).to_text();
  io::write_file(dir / "scene.cfg", spec_text);
  add("spec", "scene.cfg");
  io::write_file(dir / "manifest.txt",
                 "# geowarp scene manifest\n" + manifest.to_text() + "\n" + spec_text);
}

Scene load_scene(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a scene directory: " + dir.string());
  const Config cfg = Config::load(dir / "scene.cfg");
  Scene scene;
  scene.spec = resolve_spec(scene_spec_from_config(cfg));
  cfg.reject_unknown();
  const SceneSpec& s = scene.spec;
  for (int k = 0; k < s.num_frames; ++k) {
    Image frame = io::read_pnm(dir / frame_file(k, s.channels));
    DepthMap depth(io::read_pfm(dir / depth_file(k)));
    Mask objects = io::read_mask(dir / object_file(k));
    if (frame.width() != s.width || frame.height() != s.height || !depth.same_extent(frame) ||
        !objects.same_extent(frame)) {
      throw ParseError("frame " + std::to_string(k) + " does not match the scene size");
    }
    scene.frames.push_back(std::move(frame));
    scene.depth.push_back(std::move(depth));
    scene.object_masks.push_back(std::move(objects));
  }
  const auto poses = io::read_poses(dir / "poses.txt");
  const auto pairs = adjacent_pairs(s.num_frames);
  if (poses.size() != pairs.size()) throw ParseError("poses.txt: expected one pose per pair");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    PairTruth t;
    t.pair = pairs[i];
    t.pose = PoseSE3::from_matrix(poses[i]);
    t.rigid = io::read_flo(dir / flow_file("rigid", t.pair));
    t.residual = io::read_flo(dir / flow_file("residual", t.pair));
    t.full = io::read_flo(dir / flow_file("full", t.pair));
    t.occlusion = io::read_mask(dir / occlusion_file(t.pair));
    t.in_frame = io::read_mask(dir / in_frame_file(t.pair));
    scene.pairs.push_back(std::move(t));
  }
  return scene;
}

}  // namespace geowarp
