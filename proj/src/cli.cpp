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

#include "geowarp/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>

#include "geowarp/config.hpp"
#include "geowarp/flow_viz.hpp"
#include "geowarp/gradcheck.hpp"
#include "geowarp/io.hpp"
#include "geowarp/metrics.hpp"
#include "geowarp/synthetic_scenes.hpp"

namespace geowarp::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.txt";
constexpr const char* kRunConfigFile = "run.cfg";

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  if (!fs::is_directory(p)) throw UsageError(what + " not found: " + p.string());
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
  fs::remove(p / "FAILED", ec);
  fs::remove(p / "DONE", ec);
}

/// Writes FAILED with the error message if `body` throws, then rethrows.
template <class Fn>
int with_failure_marker(const fs::path& dir, Fn&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::error_code ec;
    if (fs::is_directory(dir, ec)) {
      try {
        io::write_file(dir / "FAILED", std::string(e.what()) + "\n");
      } catch (const std::exception&) {
      }
    }
    throw;
  }
}

std::string pair_suffix(const DirectedPair& p) {
  return std::to_string(p.target) + "_" + std::to_string(p.source);
}

void set_double(const Config& c, const std::string& s, const std::string& k, double& v) {
  v = c.get_double(s, k, v);
}

void set_int(const Config& c, const std::string& s, const std::string& k, int& v) {
  v = static_cast<int>(c.get_int(s, k, v));
}

/// Frame-to-world trajectory from the forward adjacent pair poses.
std::vector<PoseSE3> chain_trajectory(const std::vector<DirectedPair>& pairs,
                                      const std::vector<PoseSE3>& poses, int num_frames) {
  std::vector<PoseSE3> traj{PoseSE3::identity()};
  for (int k = 1; k < num_frames; ++k) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (pairs[i].target == k - 1 && pairs[i].source == k) {
        traj.push_back(compose(poses[i], traj.back()));
        break;
      }
    }
  }
  return traj;
}

std::vector<Matrix34> matrices(const std::vector<PoseSE3>& poses) {
  std::vector<Matrix34> out;
  for (const PoseSE3& p : poses) out.push_back(p.matrix());
  return out;
}

double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

Eigen::Vector3d random_direction(std::mt19937_64& gen) {
  for (;;) {
    const Eigen::Vector3d v(uniform(gen, -1, 1), uniform(gen, -1, 1), uniform(gen, -1, 1));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

/// Initial state from the [init] section, or from an earlier run.
OptimState initial_from_config(const Config& cfg, const Scene& scene,
                               const std::optional<fs::path>& init_dir) {
  const int n = scene.spec.num_frames;
  std::vector<PoseSE3> poses;
  std::vector<DepthMap> depth;
  if (init_dir) {
    for (int k = 0; k < n; ++k) depth.emplace_back(io::read_pfm(*init_dir / depth_file(k)));
    for (const Matrix34& m : io::read_poses(*init_dir / "poses.txt")) {
      poses.push_back(PoseSE3::from_matrix(m));
    }
    if (poses.size() != scene.pairs.size()) {
      throw ParseError("init poses.txt: expected " + std::to_string(scene.pairs.size()) +
                       " poses");
    }
    return initial_state(depth, poses);
  }
  const std::string pose_mode = cfg.get_string("init", "pose", "truth");
  const std::vector<double> noise =
      cfg.has("init", "pose_noise") ? cfg.get_doubles("init", "pose_noise", 2)
                                    : std::vector<double>{0.0, 0.0};
  std::mt19937_64 gen(static_cast<std::uint64_t>(cfg.get_int("init", "seed", 0)));
  for (const PairTruth& t : scene.pairs) {
    PoseSE3 p;
    if (pose_mode == "truth") {
      p = t.pose;
    } else if (pose_mode != "identity") {
      throw InvalidSpecError("init.pose", "expected truth or identity, got '" + pose_mode + "'");
    }
    const Eigen::Vector3d dr = random_direction(gen) * noise[0];
    const Eigen::Vector3d dt = random_direction(gen) * noise[1];
    for (int i = 0; i < 3; ++i) p.rotation[i] += dr[i];
    p.translation += dt;
    poses.push_back(p);
  }
  const std::string depth_mode = cfg.get_string("init", "depth", "1");
  if (depth_mode == "truth") return initial_state(scene.depth, poses);
  const double d = cfg.get_double("init", "depth", 1.0);
  if (!(d > 0.0)) throw InvalidSpecError("init.depth", "must be positive or 'truth'");
  return initial_state(scene.spec.width, scene.spec.height, n, poses, d);
}

void write_outputs(const fs::path& dir, const Scene& scene, const OptimizationRun& run,
                   const OptimizerOptions& options, bool residual_outputs) {
  const OptimState& s = run.state();
  const std::vector<DepthMap> depth = depth_of(s);
  for (std::size_t k = 0; k < depth.size(); ++k) {
    io::write_pfm(dir / depth_file(static_cast<int>(k)), depth[k]);
  }
  io::write_poses(dir / "poses.txt", matrices(s.poses));
  io::write_poses(dir / "trajectory.txt",
                  matrices(chain_trajectory(run.pairs(), s.poses, scene.spec.num_frames)));
  const StateEvaluation ev =
      evaluate_state(scene.frames, scene.spec.intrinsics, s, options.objective);
  for (std::size_t i = 0; i < run.pairs().size(); ++i) {
    const DirectedPair& p = run.pairs()[i];
    io::write_flo(dir / flow_file("rigid", p), ev.fields[i].rigid);
    if (residual_outputs) {
      io::write_flo(dir / flow_file("residual", p), s.residual[i]);
      io::write_flo(dir / flow_file("full", p), ev.fields[i].full);
      io::write_mask(dir / ("inlier_" + pair_suffix(p) + ".pgm"), ev.fields[i].inlier);
    }
  }
  const ScaleBreakdown& b = ev.parts;
  io::write_file(dir / "loss.txt",
                 "l_rw = " + io::format_double(b.l_rw) + "\nl_ds = " + io::format_double(b.l_ds) +
                     "\nl_fw = " + io::format_double(b.l_fw) + "\nl_fs = " +
                     io::format_double(b.l_fs) + "\nl_gc = " + io::format_double(b.l_gc) +
                     "\ntotal = " + io::format_double(weighted_total(b, options.objective.weights)) +
                     "\n");
}

void write_text_or_stdout(const std::optional<fs::path>& path, const std::string& csv) {
  if (path) io::write_file(*path, csv);
}

std::vector<int> frames_in(const fs::path& dir) {
  std::vector<int> out;
  for (int k = 0; fs::exists(dir / depth_file(k)); ++k) out.push_back(k);
  return out;
}

}  // namespace

std::vector<Stage> parse_stages(const std::string& stage) {
  if (stage == "all") return {Stage::rigid, Stage::residual};
  try {
    return {parse_stage(stage)};
  } catch (const Error&) {
    throw UsageError("--stage: expected rigid, residual, joint or all, got '" + stage + "'");
  }
}

fs::path default_output(const std::string& name) {
  const char* root = std::getenv("GEOWARP_OUT");
  return (root != nullptr && *root != '\0' ? fs::path(root) : fs::path("geowarp_out")) / name;
}

OptimizerOptions optimizer_options_from_config(const Config& c) {
  OptimizerOptions o;
  set_double(c, "optimizer", "lr", o.adam.lr);
  set_double(c, "optimizer", "beta1", o.adam.beta1);
  set_double(c, "optimizer", "beta2", o.adam.beta2);
  set_double(c, "optimizer", "epsilon", o.adam.epsilon);
  set_int(c, "optimizer", "iters", o.adam.max_iters);
  set_int(c, "optimizer", "levels", o.num_levels);
  set_int(c, "optimizer", "backtrack_halvings", o.backtrack_halvings);
  set_int(c, "optimizer", "residual_backtrack_halvings", o.residual_backtrack_halvings);
  set_double(c, "optimizer", "lr_growth", o.lr_growth);
  set_double(c, "optimizer", "divergence_factor", o.divergence_factor);
  set_double(c, "optimizer", "divergence_floor", o.divergence_floor);
  set_int(c, "optimizer", "patience", o.patience);
  set_double(c, "optimizer", "tolerance", o.tolerance);
  set_double(c, "optimizer", "depth_min", o.depth_min);
  set_double(c, "optimizer", "depth_max", o.depth_max);
  o.optimize_depth = c.get_bool("optimizer", "optimize_depth", o.optimize_depth);
  o.optimize_pose = c.get_bool("optimizer", "optimize_pose", o.optimize_pose);
  set_double(c, "lr_scale", "log_depth", o.lr_scale.log_depth);
  set_double(c, "lr_scale", "rotation", o.lr_scale.rotation);
  set_double(c, "lr_scale", "translation", o.lr_scale.translation);
  set_double(c, "lr_scale", "flow", o.lr_scale.flow);
  LossWeights& w = o.objective.weights;
  set_double(c, "loss", "alpha_ssim", w.alpha_ssim);
  set_double(c, "loss", "lambda_ds", w.lambda_ds);
  set_double(c, "loss", "lambda_fs", w.lambda_fs);
  set_double(c, "loss", "lambda_gc", w.lambda_gc);
  set_int(c, "loss", "num_scales", w.num_scales);
  set_double(c, "consistency", "alpha", o.objective.consistency.alpha_px);
  set_double(c, "consistency", "beta", o.objective.consistency.beta_rel);
  const std::string mask = c.get_string("consistency", "mask", "adaptive");
  if (mask == "adaptive") {
    o.objective.mask_mode = MaskMode::adaptive;
  } else if (mask == "all_ones") {
    o.objective.mask_mode = MaskMode::all_ones;
  } else {
    throw InvalidSpecError("consistency.mask", "expected adaptive or all_ones, got '" + mask + "'");
  }
  o.validate();
  return o;
}

int gen_scene(const GenSceneArgs& args, const Common&, std::ostream& out) {
  require_file(args.config, "config");
  const Config cfg = Config::load(args.config);
  SceneSpec spec = scene_spec_from_config(cfg);
  cfg.reject_unknown();
  if (args.seed) spec.seed = *args.seed;
  spec.validate();
  const fs::path dir = args.out.value_or(default_output(args.config.stem().string()));
  make_dir(dir);
  return with_failure_marker(dir, [&] {
    const Scene scene = generate_scene(spec);
    const SelfCheckReport check = scene_self_check(scene);
    export_scene(scene, dir);
    io::write_file(dir / "self_check.txt", check.to_text());
    if (!check.passed) {
      io::write_file(dir / "FAILED", "scene self-check failed\n" + check.to_text());
      out << "scene self-check FAILED\n" << check.to_text();
      return static_cast<int>(kVerificationFailure);
    }
    io::write_file(dir / "DONE", "");
    out << "wrote scene to " << dir.string() << "\n";
    return static_cast<int>(kOk);
  });
}

int optimize(const OptimizeArgs& args, const Common& common, std::ostream& out) {
  require_dir(args.scene, "scene directory");
  require_file(args.scene / "scene.cfg", "scene spec");
  if (args.config) require_file(*args.config, "config");
  if (args.init) {
    require_dir(*args.init, "init directory");
    require_file(*args.init / "poses.txt", "init poses");
  }
  const fs::path dir =
      args.out.value_or(default_output(args.scene.filename().string() + "_opt"));
  if (args.resume) {
    require_file(dir / kCheckpointFile, "checkpoint");
    require_file(dir / kRunConfigFile, "run config");
  }
  const Config cfg = args.resume ? Config::load(dir / kRunConfigFile)
                     : args.config ? Config::load(*args.config)
                                   : Config::parse("", "<defaults>");
  OptimizerOptions options = optimizer_options_from_config(cfg);
  options.objective.threads = common.threads;
  const std::vector<Stage> stages =
      parse_stages(args.resume ? cfg.get_string("run", "stage", "all") : args.stage);
  const Scene scene = load_scene(args.scene);
  const OptimState init = initial_from_config(cfg, scene, args.init);
  cfg.reject_unknown();

  make_dir(dir);
  return with_failure_marker(dir, [&] {
    std::optional<OptimizationRun> run;
    if (args.resume) {
      run.emplace(OptimizationRun::restore(io::read_file(dir / kCheckpointFile), scene.frames,
                                           scene.spec.intrinsics, options));
    } else {
      Config saved = cfg;
      saved.set("run", "stage", args.stage);
      io::write_file(dir / kRunConfigFile, saved.to_text());
      run.emplace(scene.frames, scene.spec.intrinsics, init, stages, options);
    }
    long steps = 0;
    try {
      while (!run->finished() && (args.max_steps < 0 || steps < args.max_steps)) {
        run->step();
        ++steps;
        if (args.checkpoint_every > 0 && steps % args.checkpoint_every == 0) {
          io::write_file(dir / kCheckpointFile, run->checkpoint());
        }
      }
    } catch (const DivergenceError&) {
      io::write_file(dir / "trace.csv", trace_csv(run->trace()));
      io::write_file(dir / kCheckpointFile, run->checkpoint());
      throw;
    }
    io::write_file(dir / "trace.csv", trace_csv(run->trace()));
    io::write_file(dir / kCheckpointFile, run->checkpoint());
    if (!run->finished()) {
      out << "stopped after " << steps << " iterations; resume with --resume\n";
      return static_cast<int>(kOk);
    }
    bool residual = false;
    for (Stage s : stages) residual = residual || s != Stage::rigid;
    write_outputs(dir, scene, *run, options, residual);
    io::write_file(dir / "DONE", "");
    out << "wrote results to " << dir.string() << "\n";
    return static_cast<int>(kOk);
  });
}

int eval_depth(const EvalDepthArgs& args, const Common&, std::ostream& out) {
  require_dir(args.gt, "ground-truth directory");
  require_dir(args.pred, "prediction directory");
  const std::vector<int> frames = frames_in(args.gt);
  if (frames.empty()) throw UsageError("no depth maps in " + args.gt.string());
  for (int k : frames) require_file(args.pred / depth_file(k), "predicted depth");
  DepthMetricOptions opt;
  opt.cap = args.cap;
  opt.median_scale = args.median_scale;
  std::string csv = "frame,abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,scale\n";
  DepthMetrics mean;
  for (int k : frames) {
    const DepthMap gt(io::read_pfm(args.gt / depth_file(k)));
    const DepthMap pred(io::read_pfm(args.pred / depth_file(k)));
    const DepthMetrics m = depth_metrics(pred, gt, Mask(gt.width(), gt.height(), 1.0), opt);
    csv += std::to_string(k);
    for (double v : {m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.delta1, m.delta2, m.delta3, m.scale}) {
      csv += "," + io::format_double(v);
    }
    csv += "\n";
    mean.abs_rel += m.abs_rel / frames.size();
    mean.sq_rel += m.sq_rel / frames.size();
    mean.rmse += m.rmse / frames.size();
    mean.rmse_log += m.rmse_log / frames.size();
    mean.delta1 += m.delta1 / frames.size();
    mean.delta2 += m.delta2 / frames.size();
    mean.delta3 += m.delta3 / frames.size();
    mean.count += m.count;
  }
  mean.scale = 1.0;
  out << "frames = " << frames.size() << "\n" << to_text(mean);
  write_text_or_stdout(args.out, csv);
  return kOk;
}

int eval_flow(const EvalFlowArgs& args, const Common&, std::ostream& out) {
  require_dir(args.gt, "ground-truth directory");
  require_dir(args.pred, "prediction directory");
  require_file(args.gt / "scene.cfg", "scene spec");
  if (args.kind != "full" && args.kind != "rigid" && args.kind != "residual") {
    throw UsageError("--kind: expected full, rigid or residual");
  }
  const SceneSpec spec = scene_spec_from_config(Config::load(args.gt / "scene.cfg"));
  const auto pairs = adjacent_pairs(spec.num_frames);
  for (const DirectedPair& p : pairs) {
    require_file(args.pred / flow_file(args.kind, p), "predicted flow");
    require_file(args.gt / flow_file("full", p), "ground-truth flow");
  }
  const std::string gt_kind = args.kind == "residual" ? "residual" : "full";
  std::string csv = "pair,epe_noc,epe_all\n";
  FlowEpe mean;
  std::vector<ResidualBin> hist;
  std::vector<double> hist_sum;
  for (const DirectedPair& p : pairs) {
    const FlowField pred = io::read_flo(args.pred / flow_file(args.kind, p));
    const FlowField gt = io::read_flo(args.gt / flow_file(gt_kind, p));
    const Mask occ = io::read_mask(args.gt / occlusion_file(p));
    const FlowEpe e = flow_epe_noc_all(pred, gt, occ);
    csv += pair_suffix(p) + "," + io::format_double(e.noc) + "," + io::format_double(e.all) + "\n";
    mean.noc += e.noc / pairs.size();
    mean.all += e.all / pairs.size();
    if (args.bins > 0) {
      const auto bins =
          epe_vs_residual_histogram(pred, io::read_flo(args.gt / flow_file("full", p)),
                                    io::read_flo(args.gt / flow_file("rigid", p)), args.bins,
                                    args.bin_width);
      if (hist.empty()) {
        hist = bins;
        hist_sum.assign(bins.size(), 0.0);
        for (auto& b : hist) b.count = 0;
      }
      for (std::size_t i = 0; i < bins.size(); ++i) {
        hist[i].count += bins[i].count;
        hist_sum[i] += bins[i].mean_epe * static_cast<double>(bins[i].count);
      }
    }
  }
  out << "pairs = " << pairs.size() << "\n" << to_text(mean);
  if (!hist.empty()) {
    for (std::size_t i = 0; i < hist.size(); ++i) {
      if (hist[i].count > 0) hist[i].mean_epe = hist_sum[i] / static_cast<double>(hist[i].count);
    }
    const std::string h = histogram_csv(hist);
    out << "residual histogram\n" << h;
    csv += "\n" + h;
  }
  write_text_or_stdout(args.out, csv);
  return kOk;
}

int eval_pose(const EvalPoseArgs& args, const Common&, std::ostream& out) {
  require_file(args.pred, "predicted trajectory");
  require_file(args.gt, "ground-truth trajectory");
  auto positions = [](const fs::path& p) {
    std::vector<PoseSE3> poses;
    for (const Matrix34& m : io::read_poses(p)) poses.push_back(PoseSE3::from_matrix(m));
    return camera_positions(poses);
  };
  const Trajectory pred = positions(args.pred);
  const Trajectory gt = positions(args.gt);
  if (pred.size() != gt.size()) throw DimensionError("trajectories differ in length");
  if (static_cast<int>(gt.size()) < args.snippet) {
    throw UsageError("trajectory has " + std::to_string(gt.size()) +
                     " frames, fewer than --snippet " + std::to_string(args.snippet));
  }
  const auto ps = trajectory_snippets(pred, args.snippet);
  const auto gs = trajectory_snippets(gt, args.snippet);
  const AteSummary a = ate(ps, gs);
  out << "snippet_length = " << args.snippet << "\n" << to_text(a);
  write_text_or_stdout(args.out, to_csv(a));
  return kOk;
}

int viz_flow(const VizFlowArgs& args, const Common&, std::ostream& out) {
  require_file(args.flow, "flow file");
  FlowVizOptions opt;
  if (args.max_flow) {
    opt.normalization = FlowNormalization::absolute;
    opt.max_flow = *args.max_flow;
  }
  const Image img = flow_to_color(io::read_flo(args.flow), opt);
  const fs::path path = args.out.value_or(default_output(args.flow.stem().string() + ".ppm"));
  if (path.has_parent_path()) make_dir(path.parent_path());
  io::write_pnm(path, img);
  out << "wrote " << path.string() << "\n";
  return kOk;
}

int gradcheck(const GradcheckArgs& args, const Common& common, std::ostream& out) {
  GradcheckOptions opt;
  opt.ops = args.ops;
  opt.trials = args.trials;
  opt.seed = args.seed;
  opt.corrupt = args.corrupt;
  const GradcheckReport r = run_gradcheck(opt);
  std::string text = r.to_text(args.per_trial);
  if (!common.reproducible) text += "seconds " + io::format_double(r.seconds) + "\n";
  out << text;
  if (args.out) io::write_file(*args.out, text);
  return r.passed ? kOk : kVerificationFailure;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Direct optimization of depth, pose and residual flow under warping losses",
               "geowarp"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "worker threads for the objective")
      ->check(CLI::PositiveNumber);
  app.add_flag("--reproducible", common.reproducible,
               "omit wall-clock values so repeated runs are byte-identical");

  GenSceneArgs gen;
  std::uint64_t gen_seed = 0;
  auto* c_gen = app.add_subcommand("gen-scene", "render a synthetic scene with ground truth");
  c_gen->add_option("--config", gen.config, "scene config file")->required();
  std::string gen_out_s;
  auto* gen_out = c_gen->add_option("--out", gen_out_s, "output directory");
  auto* gen_seed_opt = c_gen->add_option("--seed", gen_seed, "override scene.seed");

  OptimizeArgs opt;
  auto* c_opt = app.add_subcommand("optimize", "recover depth, poses and residual flow");
  c_opt->add_option("--scene", opt.scene, "scene directory from gen-scene")->required();
  std::string opt_cfg_s;
  auto* opt_cfg = c_opt->add_option("--config", opt_cfg_s, "optimizer config file");
  std::string opt_out_s;
  auto* opt_out = c_opt->add_option("--out", opt_out_s, "output directory");
  std::string opt_init_s;
  auto* opt_init = c_opt->add_option("--init", opt_init_s, "earlier optimize output to start from");
  c_opt->add_option("--stage", opt.stage, "rigid, residual, joint or all");
  c_opt->add_flag("--resume", opt.resume, "continue from the checkpoint in --out");
  c_opt->add_option("--max-steps", opt.max_steps, "stop after this many iterations");
  c_opt->add_option("--checkpoint-every", opt.checkpoint_every, "checkpoint period");

  EvalDepthArgs ed;
  bool no_median = false;
  auto* c_ed = app.add_subcommand("eval-depth", "depth error measures");
  c_ed->add_option("--pred", ed.pred, "directory with depth_NNN.pfm")->required();
  c_ed->add_option("--gt", ed.gt, "scene directory")->required();
  c_ed->add_option("--cap", ed.cap, "depth cap");
  c_ed->add_flag("--no-median-scale", no_median, "compare without median scaling");
  std::string ed_out_s;
  auto* ed_out = c_ed->add_option("--out", ed_out_s, "CSV file");

  EvalFlowArgs ef;
  auto* c_ef = app.add_subcommand("eval-flow", "flow end-point error");
  c_ef->add_option("--pred", ef.pred, "directory with flow_KIND_T_S.flo")->required();
  c_ef->add_option("--gt", ef.gt, "scene directory")->required();
  c_ef->add_option("--kind", ef.kind, "full, rigid or residual");
  c_ef->add_option("--bins", ef.bins, "residual-magnitude histogram bins");
  c_ef->add_option("--bin-width", ef.bin_width, "histogram bin width in pixels");
  std::string ef_out_s;
  auto* ef_out = c_ef->add_option("--out", ef_out_s, "CSV file");

  EvalPoseArgs ep;
  auto* c_ep = app.add_subcommand("eval-pose", "absolute trajectory error");
  c_ep->add_option("--pred", ep.pred, "trajectory file")->required();
  c_ep->add_option("--gt", ep.gt, "trajectory file")->required();
  c_ep->add_option("--snippet", ep.snippet, "frames per snippet")->check(CLI::Range(2, 1000000));
  std::string ep_out_s;
  auto* ep_out = c_ep->add_option("--out", ep_out_s, "CSV file");

  VizFlowArgs vf;
  double max_flow = 0.0;
  auto* c_vf = app.add_subcommand("viz-flow", "render a .flo file as a color-wheel PPM");
  c_vf->add_option("--flow", vf.flow, ".flo file")->required();
  std::string vf_out_s;
  auto* vf_out = c_vf->add_option("--out", vf_out_s, "PPM file");
  auto* vf_max = c_vf->add_option("--max-flow", max_flow, "absolute normalization radius");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference audit of all derivatives");
  c_gc->add_option("--op", gc.ops, "op to audit (repeatable)");
  c_gc->add_option("--trials", gc.trials, "random instances per op");
  c_gc->add_option("--seed", gc.seed, "instance seed");
  c_gc->add_flag("--per-trial", gc.per_trial, "print a row per trial");
  c_gc->add_flag("--corrupt-gradient", gc.corrupt)->group("");
  std::string gc_out_s;
  auto* gc_out = c_gc->add_option("--out", gc_out_s, "report file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsageError;
  }

  auto path_of = [](CLI::Option* o) -> std::optional<fs::path> {
    if (o->count() == 0) return std::nullopt;
    return fs::path(o->as<std::string>());
  };
  try {
    if (*c_gen) {
      gen.out = path_of(gen_out);
      if (gen_seed_opt->count() > 0) gen.seed = gen_seed;
      return gen_scene(gen, common, out);
    }
    if (*c_opt) {
      opt.config = path_of(opt_cfg);
      opt.out = path_of(opt_out);
      opt.init = path_of(opt_init);
      return optimize(opt, common, out);
    }
    if (*c_ed) {
      ed.median_scale = !no_median;
      ed.out = path_of(ed_out);
      return eval_depth(ed, common, out);
    }
    if (*c_ef) {
      ef.out = path_of(ef_out);
      return eval_flow(ef, common, out);
    }
    if (*c_ep) {
      ep.out = path_of(ep_out);
      return eval_pose(ep, common, out);
    }
    if (*c_vf) {
      vf.out = path_of(vf_out);
      if (vf_max->count() > 0) vf.max_flow = max_flow;
      return viz_flow(vf, common, out);
    }
    gc.out = path_of(gc_out);
    return gradcheck(gc, common, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const InvalidSpecError& e) {
    err << "error: invalid configuration: " << e.what() << "\n";
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: parse error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DimensionError& e) {
    err << "error: shape mismatch: " << e.what() << "\n";
    return kUsageError;
  } catch (const IoError& e) {
    err << "error: I/O: " << e.what() << "\n";
    return kIoError;
  } catch (const DivergenceError& e) {
    err << "error: diverged: " << e.what() << "\n";
    return kVerificationFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kVerificationFailure;
  }
}

}  // namespace geowarp::cli
