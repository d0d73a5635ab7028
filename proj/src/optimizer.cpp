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

#include "geowarp/optimizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "geowarp/errors.hpp"
#include "geowarp/io.hpp"

namespace geowarp {

namespace {

struct Layout {
  bool depth = false;
  bool pose = false;
  bool residual = false;
};

Layout layout_of(const OptimGradients& g) {
  return {!g.log_depth.empty(), !g.poses.empty(), !g.residual.empty()};
}

std::vector<double> pack(const OptimState& s, Layout l) {
  std::vector<double> x;
  if (l.depth) {
    for (const Grid& g : s.log_depth) x.insert(x.end(), g.values().begin(), g.values().end());
  }
  if (l.pose) {
    for (const PoseSE3& p : s.poses) {
      const PoseVector v = p.to_vector();
      x.insert(x.end(), v.begin(), v.end());
    }
  }
  if (l.residual) {
    for (const FlowField& f : s.residual) x.insert(x.end(), f.values().begin(), f.values().end());
  }
  return x;
}

void unpack(std::span<const double> x, Layout l, OptimState& s) {
  std::size_t k = 0;
  if (l.depth) {
    for (Grid& g : s.log_depth) {
      for (double& v : g.values()) v = x[k++];
    }
  }
  if (l.pose) {
    for (PoseSE3& p : s.poses) {
      PoseVector v;
      for (double& e : v) e = x[k++];
      p = PoseSE3::from_vector(v);
    }
  }
  if (l.residual) {
    for (FlowField& f : s.residual) {
      for (double& v : f.values()) v = x[k++];
    }
  }
}

std::vector<double> pack_grads(const OptimGradients& g, const OptimState& s) {
  std::vector<double> out;
  const auto check = [](std::span<const double> v, const char* group) {
    for (double e : v) {
      if (!std::isfinite(e)) {
        throw NonFiniteGradientError(std::string("non-finite gradient in group ") + group);
      }
    }
  };
  if (!g.log_depth.empty()) {
    if (g.log_depth.size() != s.log_depth.size()) {
      throw DimensionError("adam_step: one log-depth gradient per frame required");
    }
    for (std::size_t f = 0; f < g.log_depth.size(); ++f) {
      if (!g.log_depth[f].same_shape(s.log_depth[f])) {
        throw DimensionError("adam_step: log-depth gradient shape mismatch");
      }
      check(g.log_depth[f].values(), "log_depth");
      out.insert(out.end(), g.log_depth[f].values().begin(), g.log_depth[f].values().end());
    }
  }
  if (!g.poses.empty()) {
    if (g.poses.size() != s.poses.size()) {
      throw DimensionError("adam_step: one pose gradient per pair required");
    }
    for (const PoseVector& p : g.poses) {
      check(p, "pose");
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  if (!g.residual.empty()) {
    if (g.residual.size() != s.residual.size()) {
      throw DimensionError("adam_step: one residual gradient per pair required");
    }
    for (std::size_t i = 0; i < g.residual.size(); ++i) {
      if (!g.residual[i].same_shape(s.residual[i])) {
        throw DimensionError("adam_step: residual gradient shape mismatch");
      }
      check(g.residual[i].values(), "residual");
      out.insert(out.end(), g.residual[i].values().begin(), g.residual[i].values().end());
    }
  }
  return out;
}

std::vector<double> lr_scales(const OptimState& s, Layout l, const LearningRateScale& r) {
  std::vector<double> out;
  if (l.depth) {
    for (const Grid& g : s.log_depth) out.insert(out.end(), g.size(), r.log_depth);
  }
  if (l.pose) {
    for (std::size_t i = 0; i < s.poses.size(); ++i) {
      out.insert(out.end(), 3, r.rotation);
      out.insert(out.end(), 3, r.translation);
    }
  }
  if (l.residual) {
    for (const FlowField& f : s.residual) out.insert(out.end(), f.size(), r.flow);
  }
  return out;
}

void project_depth(OptimState& s, double lo, double hi) {
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (Grid& g : s.log_depth) {
    for (double& v : g.values()) v = std::clamp(v, a, b);
  }
}

// Updates the moments in `s` and returns the bias-corrected direction.
std::vector<double> adam_direction(OptimState& s, std::span<const double> g,
                                   const AdamParams& p) {
  if (s.adam_m.size() != g.size() || s.adam_v.size() != g.size()) {
    s.adam_m.assign(g.size(), 0.0);
    s.adam_v.assign(g.size(), 0.0);
    s.adam_t = 0;
  }
  ++s.adam_t;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(s.adam_t));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(s.adam_t));
  std::vector<double> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    s.adam_m[i] = p.beta1 * s.adam_m[i] + (1.0 - p.beta1) * g[i];
    s.adam_v[i] = p.beta2 * s.adam_v[i] + (1.0 - p.beta2) * g[i] * g[i];
    d[i] = (s.adam_m[i] / c1) / (std::sqrt(s.adam_v[i] / c2) + p.epsilon);
  }
  return d;
}

Grid log_of(const Grid& depth) {
  Grid out = depth;
  for (double& v : out.values()) v = std::log(v);
  return out;
}

DepthMap exp_of(const Grid& log_depth) {
  Grid out = log_depth;
  for (double& v : out.values()) v = std::exp(v);
  return DepthMap(std::move(out));
}

// Every group of a full-resolution state pooled to `level`.
OptimState pooled(const OptimState& full, int level) {
  OptimState s;
  s.level = level;
  s.iteration = full.iteration;
  s.poses = full.poses;
  for (const Grid& g : full.log_depth) {
    if (level == 0) {
      s.log_depth.push_back(g);
    } else {
      s.log_depth.push_back(log_of(build_pyramid(exp_of(g), level + 1)[level]));
    }
  }
  for (const FlowField& f : full.residual) {
    s.residual.push_back(level == 0 ? f : build_pyramid(f, level + 1)[level]);
  }
  return s;
}

// ---- checkpoint text --------------------------------------------------------

std::string hex(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

double unhex(const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("checkpoint: bad number '" + s + "'");
  }
  return v;
}

class CheckpointWriter {
 public:
  void put(const std::string& key, const std::vector<std::string>& fields) {
    out_ += key;
    for (const auto& f : fields) out_ += " " + f;
    out_ += "\n";
  }
  void put_long(const std::string& key, long v) { put(key, {std::to_string(v)}); }
  void put_doubles(const std::string& key, std::span<const double> v) {
    std::vector<std::string> f;
    f.reserve(v.size());
    for (double e : v) f.push_back(hex(e));
    put(key, f);
  }
  void put_grid(const std::string& key, const Grid& g) {
    std::vector<std::string> f{std::to_string(g.width()), std::to_string(g.height()),
                               std::to_string(g.channels())};
    for (double e : g.values()) f.push_back(hex(e));
    put(key, f);
  }
  void put_breakdown(const std::string& key, const ScaleBreakdown& b) {
    const double v[] = {b.l_rw, b.l_ds, b.l_fw, b.l_fs, b.l_gc};
    put_doubles(key, v);
  }
  void put_state(const std::string& key, const OptimState& s) {
    put_long(key + ".level", s.level);
    put_long(key + ".iteration", s.iteration);
    put_long(key + ".frames", static_cast<long>(s.log_depth.size()));
    for (std::size_t f = 0; f < s.log_depth.size(); ++f) {
      put_grid(key + ".log_depth." + std::to_string(f), s.log_depth[f]);
    }
    put_long(key + ".pairs", static_cast<long>(s.poses.size()));
    for (std::size_t i = 0; i < s.poses.size(); ++i) {
      const PoseVector v = s.poses[i].to_vector();
      put_doubles(key + ".pose." + std::to_string(i), v);
    }
    put_long(key + ".residuals", static_cast<long>(s.residual.size()));
    for (std::size_t i = 0; i < s.residual.size(); ++i) {
      put_grid(key + ".residual." + std::to_string(i), s.residual[i]);
    }
    put_doubles(key + ".adam_m", s.adam_m);
    put_doubles(key + ".adam_v", s.adam_v);
    put_long(key + ".adam_t", s.adam_t);
  }
  const std::string& text() const { return out_; }

 private:
  std::string out_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string key;
      if (!(ls >> key) || key.front() == '#') continue;
      std::vector<std::string> f;
      std::string tok;
      while (ls >> tok) f.push_back(tok);
      entries_[key] = std::move(f);
    }
  }
  const std::vector<std::string>& get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw ParseError("checkpoint: missing '" + key + "'");
    return it->second;
  }
  long get_long(const std::string& key) const {
    const auto& f = get(key);
    long v = 0;
    if (f.size() != 1) throw ParseError("checkpoint: bad '" + key + "'");
    const auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), v);
    if (ec != std::errc() || p != f[0].data() + f[0].size()) {
      throw ParseError("checkpoint: bad integer for '" + key + "'");
    }
    return v;
  }
  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> v;
    for (const auto& s : get(key)) v.push_back(unhex(s));
    return v;
  }
  double get_double(const std::string& key) const {
    const auto v = get_doubles(key);
    if (v.size() != 1) throw ParseError("checkpoint: bad '" + key + "'");
    return v[0];
  }
  Grid get_grid(const std::string& key) const {
    const auto& f = get(key);
    if (f.size() < 3) throw ParseError("checkpoint: bad grid '" + key + "'");
    const int w = std::stoi(f[0]);
    const int h = std::stoi(f[1]);
    const int c = std::stoi(f[2]);
    std::vector<double> data;
    for (std::size_t i = 3; i < f.size(); ++i) data.push_back(unhex(f[i]));
    if (data.size() != static_cast<std::size_t>(w) * h * c) {
      throw ParseError("checkpoint: grid '" + key + "' has the wrong size");
    }
    return Grid(w, h, c, std::move(data));
  }
  ScaleBreakdown get_breakdown(const std::string& key) const {
    const auto v = get_doubles(key);
    if (v.size() != 5) throw ParseError("checkpoint: bad breakdown '" + key + "'");
    return {v[0], v[1], v[2], v[3], v[4]};
  }
  OptimState get_state(const std::string& key) const {
    OptimState s;
    s.level = static_cast<int>(get_long(key + ".level"));
    s.iteration = get_long(key + ".iteration");
    const long frames = get_long(key + ".frames");
    for (long f = 0; f < frames; ++f) {
      s.log_depth.push_back(get_grid(key + ".log_depth." + std::to_string(f)));
    }
    const long pairs = get_long(key + ".pairs");
    for (long i = 0; i < pairs; ++i) {
      const auto v = get_doubles(key + ".pose." + std::to_string(i));
      if (v.size() != 6) throw ParseError("checkpoint: bad pose");
      s.poses.push_back(PoseSE3::from_vector({v[0], v[1], v[2], v[3], v[4], v[5]}));
    }
    const long residuals = get_long(key + ".residuals");
    for (long i = 0; i < residuals; ++i) {
      s.residual.emplace_back(get_grid(key + ".residual." + std::to_string(i)));
    }
    s.adam_m = get_doubles(key + ".adam_m");
    s.adam_v = get_doubles(key + ".adam_v");
    s.adam_t = get_long(key + ".adam_t");
    return s;
  }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

constexpr const char* kCheckpointMagic = "geowarp-checkpoint-1";

}  // namespace

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::rigid: return "rigid";
    case Stage::residual: return "residual";
    case Stage::joint: return "joint";
  }
  return "rigid";
}

Stage parse_stage(const std::string& text) {
  if (text == "rigid") return Stage::rigid;
  if (text == "residual") return Stage::residual;
  if (text == "joint") return Stage::joint;
  throw InvalidSpecError("stage", "expected rigid, residual or joint, got '" + text + "'");
}

void AdamParams::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidSpecError("adam.lr", "must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidSpecError("adam.beta1", "must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidSpecError("adam.beta2", "must be in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidSpecError("adam.epsilon", "must be positive");
  if (max_iters < 0) throw InvalidSpecError("adam.max_iters", "must be nonnegative");
}

void OptimizerOptions::validate() const {
  adam.validate();
  objective.weights.validate();
  objective.consistency.validate();
  for (double s : {lr_scale.log_depth, lr_scale.rotation, lr_scale.translation, lr_scale.flow}) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw InvalidSpecError("optimizer.lr_scale", "multipliers must be positive");
    }
  }
  if (!(depth_min > 0.0 && depth_max > depth_min) || !std::isfinite(depth_max)) {
    throw InvalidSpecError("optimizer.depth_range", "need 0 < min < max");
  }
  if (backtrack_halvings < 0) {
    throw InvalidSpecError("optimizer.backtrack_halvings", "must be nonnegative");
  }
  if (residual_backtrack_halvings < 0) {
    throw InvalidSpecError("optimizer.residual_backtrack_halvings", "must be nonnegative");
  }
  if (!(lr_growth >= 1.0) || !std::isfinite(lr_growth)) {
    throw InvalidSpecError("optimizer.lr_growth", "must be at least 1");
  }
  if (!(divergence_factor > 1.0)) {
    throw InvalidSpecError("optimizer.divergence_factor", "must exceed 1");
  }
  if (!(divergence_floor >= 0.0) || !std::isfinite(divergence_floor)) {
    throw InvalidSpecError("optimizer.divergence_floor", "must be nonnegative");
  }
  if (patience < 0) throw InvalidSpecError("optimizer.patience", "must be nonnegative");
  if (num_levels < 1) throw InvalidSpecError("optimizer.levels", "must be at least 1");
}

OptimState initial_state(int width, int height, int num_frames, std::span<const PoseSE3> poses,
                         double depth) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw DomainError("initial depth must be positive");
  std::vector<DepthMap> d(num_frames, DepthMap(width, height, depth));
  return initial_state(d, poses);
}

OptimState initial_state(std::span<const DepthMap> depth, std::span<const PoseSE3> poses) {
  if (depth.size() < 2) throw DomainError("at least two frames required");
  OptimState s;
  for (const DepthMap& d : depth) s.log_depth.push_back(log_of(d));
  s.poses.assign(poses.begin(), poses.end());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    s.residual.emplace_back(depth.front().width(), depth.front().height());
  }
  return s;
}

std::vector<DepthMap> depth_of(const OptimState& state) {
  std::vector<DepthMap> out;
  for (const Grid& g : state.log_depth) out.push_back(exp_of(g));
  return out;
}

OptimState adam_step(const OptimState& state, const OptimGradients& grads,
                     const OptimizerOptions& options) {
  options.adam.validate();
  const Layout l = layout_of(grads);
  OptimState s = state;
  const std::vector<double> g = pack_grads(grads, s);
  const std::vector<double> d = adam_direction(s, g, options.adam);
  const std::vector<double> scale = lr_scales(s, l, options.lr_scale);
  std::vector<double> x = pack(s, l);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= options.adam.lr * scale[i] * d[i];
  unpack(x, l, s);
  project_depth(s, options.depth_min, options.depth_max);
  ++s.iteration;
  return s;
}

std::string trace_csv(std::span<const TraceRow> trace) {
  std::string out = "iteration,l_rw,l_ds,l_fw,l_fs,l_gc,total\n";
  for (const TraceRow& r : trace) {
    out += std::to_string(r.iteration);
    for (double v : {r.best.l_rw, r.best.l_ds, r.best.l_fw, r.best.l_fs, r.best.l_gc, r.total}) {
      out += "," + io::format_double(v);
    }
    out += "\n";
  }
  return out;
}

// ---- OptimizationRun ---------------------------------------------------------

OptimizationRun::OptimizationRun(std::vector<Image> frames, CameraIntrinsics intrinsics,
                                 OptimState init, std::vector<Stage> stages,
                                 OptimizerOptions options)
    : frames_(std::move(frames)),
      intrinsics_(intrinsics),
      stages_(std::move(stages)),
      options_(std::move(options)) {
  options_.validate();
  intrinsics_.validate();
  if (frames_.size() < 2) throw DomainError("optimization needs at least two frames");
  if (stages_.empty()) throw DomainError("optimization needs at least one stage");
  pairs_ = adjacent_pairs(static_cast<int>(frames_.size()));
  if (init.log_depth.size() != frames_.size() || init.poses.size() != pairs_.size()) {
    throw DimensionError("initial state does not match the frames and pairs");
  }
  if (init.residual.empty()) {
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      init.residual.emplace_back(frames_[0].width(), frames_[0].height());
    }
  }
  for (std::size_t f = 0; f < frames_.size(); ++f) {
    if (!frames_[f].same_shape(frames_[0]) || !init.log_depth[f].same_extent(frames_[0])) {
      throw DimensionError("frames and initial depth must share one size");
    }
    for (double v : init.log_depth[f].values()) {
      if (!std::isfinite(v)) throw DomainError("initial depth must be positive and finite");
    }
  }
  for (const FlowField& r : init.residual) {
    if (!r.same_extent(frames_[0])) throw DimensionError("residual flow size mismatch");
  }
  const int scales = std::min(options_.num_levels, options_.objective.weights.num_scales);
  for (const Image& f : frames_) pyramids_.push_back(build_pyramid(f, scales));
  init.level = 0;
  init.adam_m.clear();
  init.adam_v.clear();
  init.adam_t = 0;
  project_depth(init, options_.depth_min, options_.depth_max);
  stage_input_ = init;
  current_ = init;
  level_ = scales - 1;
}

bool OptimizationRun::optimizes_depth() const {
  const Stage s = stages_[stage_index_];
  return s != Stage::residual && options_.optimize_depth;
}

bool OptimizationRun::optimizes_pose() const {
  const Stage s = stages_[stage_index_];
  return s != Stage::residual && options_.optimize_pose;
}

bool OptimizationRun::optimizes_residual() const {
  return stages_[stage_index_] != Stage::rigid;
}

ObjectiveOptions OptimizationRun::stage_objective() const {
  ObjectiveOptions o = options_.objective;
  const Stage s = stages_[stage_index_];
  o.terms.rigid = s != Stage::residual;
  o.terms.residual = s != Stage::rigid;
  return o;
}

OptimizationRun::Eval OptimizationRun::evaluate(const OptimState& s) const {
  std::vector<Image> frames;
  for (const auto& p : pyramids_) frames.push_back(p[s.level]);
  const std::vector<DepthMap> depth = depth_of(s);
  ScaleInputs in{frames, depth, pairs_, s.poses, s.residual, intrinsics_.at_level(s.level)};
  const ObjectiveOptions o = stage_objective();
  ScaleGradients g;
  Eval e;
  e.parts = evaluate_scale(in, o, &g);
  e.value = selected_total(e.parts, o.weights, o.terms);
  if (optimizes_depth()) {
    for (std::size_t f = 0; f < depth.size(); ++f) {
      Grid d = g.d_depth[f];
      for (std::size_t k = 0; k < d.size(); ++k) d.values()[k] *= depth[f].values()[k];
      e.grads.log_depth.push_back(std::move(d));
    }
  }
  if (optimizes_pose()) e.grads.poses = g.d_pose;
  if (optimizes_residual()) {
    for (Grid& r : g.d_residual) e.grads.residual.push_back(std::move(r));
  }
  return e;
}

void OptimizationRun::begin_level() {
  OptimState s = pooled(stage_input_, level_);
  if (current_.level == level_ + 1) {
    // Carry optimized groups up from the previous level.
    const int w = pyramids_[0][level_].width();
    const int h = pyramids_[0][level_].height();
    if (optimizes_depth()) {
      for (std::size_t f = 0; f < s.log_depth.size(); ++f) {
        s.log_depth[f] = upsample_bilinear(current_.log_depth[f], w, h);
      }
    }
    if (optimizes_pose()) s.poses = current_.poses;
    if (optimizes_residual()) {
      for (std::size_t i = 0; i < s.residual.size(); ++i) {
        Grid up = upsample_bilinear(current_.residual[i], w, h);
        for (double& v : up.values()) v *= 2.0;
        s.residual[i] = FlowField(std::move(up));
      }
    }
  }
  s.level = level_;
  s.iteration = current_.iteration;
  project_depth(s, options_.depth_min, options_.depth_max);
  current_ = std::move(s);
  cached_ = evaluate(current_);
  have_eval_ = true;
  if (!std::isfinite(cached_.value)) throw DivergenceError("initial loss is not finite");
  current_value_ = cached_.value;
  best_ = current_;
  best_parts_ = cached_.parts;
  best_value_ = current_value_;
  mark_value_ = best_value_;
  since_mark_ = 0;
  level_iter_ = 0;
  lr_factor_ = 1.0;
  in_level_ = true;
}

void OptimizationRun::finish_level() {
  const long iteration = current_.iteration;
  current_ = best_;
  current_.iteration = iteration;
  current_.adam_m.clear();
  current_.adam_v.clear();
  current_.adam_t = 0;
  in_level_ = false;
  have_eval_ = false;
  if (level_ > 0) {
    --level_;
    return;
  }
  // Stage done: its level-0 result feeds the next stage.
  stage_input_ = current_;
  ++stage_index_;
  if (stage_index_ == stages_.size()) {
    finished_ = true;
    return;
  }
  level_ = static_cast<int>(pyramids_[0].num_scales()) - 1;
  current_.level = -1;  // no carry-over into the next stage
}

void OptimizationRun::step() {
  if (finished_) return;
  if (!in_level_) begin_level();
  if (level_iter_ >= options_.adam.max_iters) {
    finish_level();
    return;
  }
  if (!have_eval_) {
    cached_ = evaluate(current_);
    have_eval_ = true;
  }
  const Layout l = layout_of(cached_.grads);
  OptimState moved = current_;
  const std::vector<double> g = pack_grads(cached_.grads, moved);
  const std::vector<double> d = adam_direction(moved, g, options_.adam);
  const std::vector<double> scale = lr_scales(moved, l, options_.lr_scale);
  const std::vector<double> x = pack(moved, l);

  const int limit = optimizes_residual() ? options_.residual_backtrack_halvings
                                         : options_.backtrack_halvings;
  double factor = lr_factor_;
  int halvings = 0;
  OptimState trial;
  Eval trial_eval;
  for (;;) {
    trial = moved;
    std::vector<double> y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= factor * options_.adam.lr * scale[i] * d[i];
    unpack(y, l, trial);
    project_depth(trial, options_.depth_min, options_.depth_max);
    trial_eval = evaluate(trial);
    if (trial_eval.value <= current_value_ || halvings >= limit) break;
    factor *= 0.5;
    ++halvings;
  }
  if (!std::isfinite(trial_eval.value)) throw DivergenceError("loss became non-finite");
  const double floor = std::ldexp(1.0, -limit);
  lr_factor_ = halvings > 0 ? std::max(factor, floor)
                            : std::min(1.0, factor * options_.lr_growth);

  ++trial.iteration;
  ++global_iter_;
  ++level_iter_;
  current_ = std::move(trial);
  current_value_ = trial_eval.value;
  cached_ = std::move(trial_eval);
  have_eval_ = true;

  if (current_value_ < best_value_) {
    best_ = current_;
    best_parts_ = cached_.parts;
    best_value_ = current_value_;
  }
  if (current_value_ > options_.divergence_factor * std::max(best_value_, options_.divergence_floor)) {
    throw DivergenceError("loss " + io::format_double(current_value_) + " exceeds " +
                          io::format_double(options_.divergence_factor) + " times the best " +
                          io::format_double(best_value_));
  }
  trace_.push_back({current_.iteration, stages_[stage_index_], level_, best_parts_, best_value_,
                    current_value_, halvings});

  if (best_value_ < mark_value_ * (1.0 - options_.tolerance)) {
    mark_value_ = best_value_;
    since_mark_ = 0;
  } else {
    ++since_mark_;
  }
  if (level_iter_ >= options_.adam.max_iters ||
      (options_.patience > 0 && since_mark_ >= options_.patience)) {
    finish_level();
  }
}

void OptimizationRun::run(long max_steps) {
  long done = 0;
  while (!finished_ && (max_steps < 0 || done < max_steps)) {
    const long before = global_iter_;
    step();
    done += global_iter_ - before;
  }
}

std::string OptimizationRun::checkpoint() const {
  CheckpointWriter w;
  w.put(kCheckpointMagic, {});
  std::vector<std::string> stages;
  for (Stage s : stages_) stages.push_back(to_string(s));
  w.put("stages", stages);
  w.put_long("stage_index", static_cast<long>(stage_index_));
  w.put_long("level", level_);
  w.put_long("level_iter", level_iter_);
  w.put_long("in_level", in_level_ ? 1 : 0);
  w.put_long("finished", finished_ ? 1 : 0);
  w.put_long("global_iter", global_iter_);
  w.put_long("since_mark", since_mark_);
  w.put_doubles("best_value", std::vector<double>{best_value_});
  w.put_doubles("current_value", std::vector<double>{current_value_});
  w.put_doubles("mark_value", std::vector<double>{mark_value_});
  w.put_doubles("lr_factor", std::vector<double>{lr_factor_});
  w.put_breakdown("best_parts", best_parts_);
  w.put_state("stage_input", stage_input_);
  w.put_state("current", current_);
  w.put_state("best", best_);
  w.put_long("trace", static_cast<long>(trace_.size()));
  for (std::size_t i = 0; i < trace_.size(); ++i) {
    const TraceRow& r = trace_[i];
    const std::string k = "trace." + std::to_string(i);
    w.put(k + ".meta", {std::to_string(r.iteration), to_string(r.stage), std::to_string(r.level),
                        std::to_string(r.halvings)});
    w.put_breakdown(k + ".best", r.best);
    w.put_doubles(k + ".values", std::vector<double>{r.total, r.current});
  }
  return w.text();
}

OptimizationRun OptimizationRun::restore(const std::string& text, std::vector<Image> frames,
                                         CameraIntrinsics intrinsics, OptimizerOptions options) {
  const CheckpointReader r(text);
  r.get(kCheckpointMagic);
  std::vector<Stage> stages;
  for (const auto& s : r.get("stages")) stages.push_back(parse_stage(s));
  OptimState stage_input = r.get_state("stage_input");
  OptimizationRun run(std::move(frames), intrinsics, stage_input, stages, std::move(options));
  run.stage_input_ = std::move(stage_input);
  run.stage_index_ = static_cast<std::size_t>(r.get_long("stage_index"));
  run.level_ = static_cast<int>(r.get_long("level"));
  run.level_iter_ = static_cast<int>(r.get_long("level_iter"));
  run.in_level_ = r.get_long("in_level") != 0;
  run.finished_ = r.get_long("finished") != 0;
  run.global_iter_ = r.get_long("global_iter");
  run.since_mark_ = static_cast<int>(r.get_long("since_mark"));
  run.best_value_ = r.get_double("best_value");
  run.current_value_ = r.get_double("current_value");
  run.mark_value_ = r.get_double("mark_value");
  run.lr_factor_ = r.get_double("lr_factor");
  run.best_parts_ = r.get_breakdown("best_parts");
  run.current_ = r.get_state("current");
  run.best_ = r.get_state("best");
  if (run.stage_index_ > run.stages_.size() ||
      (!run.finished_ && run.stage_index_ >= run.stages_.size())) {
    throw ParseError("checkpoint: stage index out of range");
  }
  const long rows = r.get_long("trace");
  for (long i = 0; i < rows; ++i) {
    const std::string k = "trace." + std::to_string(i);
    const auto& meta = r.get(k + ".meta");
    if (meta.size() != 4) throw ParseError("checkpoint: bad trace row");
    TraceRow row;
    row.iteration = std::stol(meta[0]);
    row.stage = parse_stage(meta[1]);
    row.level = std::stoi(meta[2]);
    row.halvings = std::stoi(meta[3]);
    row.best = r.get_breakdown(k + ".best");
    const auto v = r.get_doubles(k + ".values");
    if (v.size() != 2) throw ParseError("checkpoint: bad trace values");
    row.total = v[0];
    row.current = v[1];
    run.trace_.push_back(row);
  }
  run.have_eval_ = false;
  return run;
}

OptimResult optimize_rigid(const std::vector<Image>& frames, const CameraIntrinsics& k,
                           const OptimState& init, const OptimizerOptions& options) {
  OptimizationRun run(frames, k, init, {Stage::rigid}, options);
  run.run();
  return {run.state(), run.trace()};
}

OptimResult optimize_residual(const std::vector<Image>& frames, const CameraIntrinsics& k,
                              const OptimState& rigid, const OptimizerOptions& options) {
  OptimizationRun run(frames, k, rigid, {Stage::residual}, options);
  run.run();
  return {run.state(), run.trace()};
}

StateEvaluation evaluate_state(const std::vector<Image>& frames, const CameraIntrinsics& k,
                               const OptimState& state, const ObjectiveOptions& options) {
  const std::vector<DirectedPair> pairs = adjacent_pairs(static_cast<int>(frames.size()));
  const std::vector<DepthMap> depth = depth_of(state);
  ScaleInputs in{frames, depth, pairs, state.poses, state.residual, k};
  StateEvaluation out;
  out.parts = evaluate_scale(in, options, nullptr, &out.fields);
  return out;
}

}  // namespace geowarp
