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

#include "geowarp/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "geowarp/consistency.hpp"
#include "geowarp/errors.hpp"
#include "geowarp/io.hpp"
#include "geowarp/losses.hpp"
#include "geowarp/rigid_geometry.hpp"
#include "geowarp/warping.hpp"

namespace geowarp {

namespace {

// Portable draws: the standard distributions differ between library vendors.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t op, std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(op), static_cast<std::uint32_t>(trial)};
    gen_.seed(seq);
  }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  int index(int n) { return static_cast<int>(gen_() % static_cast<std::uint64_t>(n)); }
  /// Random cell of [0, n-1] plus a fraction clear of the cell boundaries.
  double cell_point(int n) { return index(n - 1) + uniform(0.15, 0.85); }

 private:
  std::mt19937_64 gen_;
};

Grid random_grid(Rng& rng, int w, int h, int c, double lo, double hi) {
  Grid g(w, h, c);
  for (double& v : g.values()) v = rng.uniform(lo, hi);
  return g;
}

Image random_image(Rng& rng, int w, int h, int c) { return Image(random_grid(rng, w, h, c, 0.1, 0.9)); }

double dot(const Grid& a, const Grid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
  return s;
}

/// Flow whose targets p + f(p) are cell-interior points inside the grid.
FlowField interior_flow(Rng& rng, int w, int h) {
  FlowField f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.u(x, y) = rng.cell_point(w) - x;
      f.v(x, y) = rng.cell_point(h) - y;
    }
  }
  return f;
}

/// Inputs as one flat vector, the scalar objective over it and its analytic
/// gradient.
struct Problem {
  std::vector<double> x;
  std::function<double(const std::vector<double>&)> f;
  std::vector<double> grad;
};

void append(std::vector<double>& out, const Grid& g) {
  out.insert(out.end(), g.values().begin(), g.values().end());
}

Grid slice(const std::vector<double>& x, std::size_t offset, int w, int h, int c) {
  const auto begin = x.begin() + static_cast<std::ptrdiff_t>(offset);
  return Grid(w, h, c, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(w * h * c)));
}

Problem bilinear_problem(Rng& rng, int w, int h) {
  constexpr int kPoints = 6;
  const Grid grid = random_grid(rng, w, h, 3, 0.0, 1.0);
  std::vector<double> pts;
  for (int i = 0; i < kPoints; ++i) {
    pts.push_back(rng.cell_point(w));
    pts.push_back(rng.cell_point(h));
  }
  const Grid wts = random_grid(rng, kPoints, 1, 3, -1.0, 1.0);
  Problem p;
  append(p.x, grid);
  p.x.insert(p.x.end(), pts.begin(), pts.end());
  const std::size_t off = grid.size();
  p.f = [=](const std::vector<double>& x) {
    const Grid g = slice(x, 0, w, h, 3);
    double s = 0.0;
    for (int i = 0; i < kPoints; ++i) {
      const Sample smp = bilinear_sample(g, x[off + 2 * i], x[off + 2 * i + 1]);
      for (int c = 0; c < 3; ++c) s += wts(i, 0, c) * smp.value[c];
    }
    return s;
  };
  Grid d_grid(w, h, 3);
  std::vector<double> d_pts(pts.size(), 0.0);
  for (int i = 0; i < kPoints; ++i) {
    const double px = pts[2 * i], py = pts[2 * i + 1];
    const SampleGradient sg = bilinear_sample_gradient(grid, px, py);
    const BilinearTap tap = make_tap(w, h, px, py);
    for (int c = 0; c < 3; ++c) {
      d_pts[2 * i] += wts(i, 0, c) * sg.d_dx[c];
      d_pts[2 * i + 1] += wts(i, 0, c) * sg.d_dy[c];
      scatter(d_grid, tap, c, wts(i, 0, c));
    }
  }
  append(p.grad, d_grid);
  p.grad.insert(p.grad.end(), d_pts.begin(), d_pts.end());
  return p;
}

Problem inverse_warp_problem(Rng& rng, int w, int h) {
  const Image source = random_image(rng, w, h, 3);
  FlowField flow = interior_flow(rng, w, h);
  // A few lookups well outside the grid exercise the clamped branch.
  for (int i = 0; i < 4; ++i) {
    const int x = rng.index(w), y = rng.index(h);
    const double beyond = rng.uniform(0.6, 2.0);
    flow.u(x, y) = rng.index(2) == 0 ? -x - beyond : w - 1 - x + beyond;
  }
  const Grid wts = random_grid(rng, w, h, 3, -1.0, 1.0);
  Problem p;
  append(p.x, flow);
  append(p.x, source);
  const std::size_t off = flow.size();
  p.f = [=](const std::vector<double>& x) {
    const WarpResult r =
        inverse_warp(Image(slice(x, off, w, h, 3)), FlowField(slice(x, 0, w, h, 2)));
    return dot(wts, r.warped);
  };
  const WarpGradient g = inverse_warp_vjp(source, flow, wts);
  append(p.grad, g.d_flow);
  append(p.grad, g.d_source);
  return p;
}

Problem rigid_flow_problem(Rng& rng, int w, int h) {
  const CameraIntrinsics k{12.0, 12.0, 0.5 * (w - 1), 0.5 * (h - 1)};
  const DepthMap depth(random_grid(rng, w, h, 1, 1.0, 5.0));
  PoseVector pv{};
  for (int i = 0; i < 3; ++i) pv[i] = rng.uniform(-0.1, 0.1);
  for (int i = 3; i < 6; ++i) pv[i] = rng.uniform(-0.3, 0.3);
  const Grid wts = random_grid(rng, w, h, 2, -1.0, 1.0);
  Problem p;
  append(p.x, depth);
  p.x.insert(p.x.end(), pv.begin(), pv.end());
  const std::size_t off = depth.size();
  p.f = [=](const std::vector<double>& x) {
    PoseVector q{};
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(off), 6, q.begin());
    return dot(wts, rigid_flow(DepthMap(slice(x, 0, w, h, 1)), PoseSE3::from_vector(q), k).flow);
  };
  const RigidFlowGradient g = rigid_flow_vjp(depth, PoseSE3::from_vector(pv), k, wts);
  append(p.grad, g.d_depth);
  p.grad.insert(p.grad.end(), g.d_pose.begin(), g.d_pose.end());
  return p;
}

Problem ssim_problem(Rng& rng, int w, int h) {
  const Image a = random_image(rng, w, h, 3);
  const Image b = random_image(rng, w, h, 3);
  const Grid wts = random_grid(rng, w, h, 3, -1.0, 1.0);
  Problem p;
  append(p.x, b);
  p.f = [=](const std::vector<double>& x) {
    return dot(wts, ssim_map(a, Image(slice(x, 0, w, h, 3))));
  };
  append(p.grad, ssim_map_vjp(a, b, wts));
  return p;
}

Problem photometric_problem(Rng& rng, int w, int h) {
  const Image target = random_image(rng, w, h, 3);
  WarpResult warped{random_image(rng, w, h, 3), Mask(w, h, 1.0)};
  Mask weight(w, h, 1.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      warped.valid(x, y) = rng.uniform(0.0, 1.0) < 0.8 ? 1.0 : 0.0;
      weight(x, y) = rng.uniform(0.0, 1.0);
    }
  }
  const double alpha = 0.85;
  Problem p;
  append(p.x, warped.warped);
  p.f = [=](const std::vector<double>& x) {
    const WarpResult r{Image(slice(x, 0, w, h, 3)), warped.valid};
    return photometric_loss(target, r, &weight, alpha);
  };
  append(p.grad, photometric_loss_vjp(target, warped, &weight, alpha));
  return p;
}

Problem smoothness_problem(Rng& rng, int w, int h, int channels) {
  const Grid field = random_grid(rng, w, h, channels, -2.0, 2.0);
  const Image guide = random_image(rng, w, h, 3);
  Problem p;
  append(p.x, field);
  p.f = [=](const std::vector<double>& x) {
    return edge_aware_smoothness(slice(x, 0, w, h, channels), guide);
  };
  append(p.grad, edge_aware_smoothness_vjp(field, guide));
  return p;
}

Problem flow_difference_problem(Rng& rng, int w, int h, bool loss) {
  const FlowField fwd = interior_flow(rng, w, h);
  const FlowField bwd(random_grid(rng, w, h, 2, -3.0, 3.0));
  const Grid wts = random_grid(rng, w, h, 2, -1.0, 1.0);
  Mask inlier(w, h, 1.0);
  for (double& v : inlier.values()) v = rng.uniform(0.0, 1.0) < 0.7 ? 1.0 : 0.0;
  inlier(0, 0) = 1.0;
  Problem p;
  append(p.x, fwd);
  append(p.x, bwd);
  const std::size_t off = fwd.size();
  p.f = [=](const std::vector<double>& x) {
    const FlowDifference d =
        flow_difference(FlowField(slice(x, 0, w, h, 2)), FlowField(slice(x, off, w, h, 2)));
    return loss ? geometric_consistency_loss(d.delta, inlier) : dot(wts, d.delta);
  };
  const Grid upstream =
      loss ? geometric_consistency_loss_vjp(flow_difference(fwd, bwd).delta, inlier) : wts;
  const FlowDifferenceGradient g = flow_difference_vjp(fwd, bwd, upstream);
  append(p.grad, g.d_fwd);
  append(p.grad, g.d_bwd);
  return p;
}

Problem make_problem(const std::string& op, Rng& rng, int trial, int w, int h) {
  if (op == "bilinear_sample") return bilinear_problem(rng, w, h);
  if (op == "inverse_warp") return inverse_warp_problem(rng, w, h);
  if (op == "rigid_flow") return rigid_flow_problem(rng, w, h);
  if (op == "ssim") return ssim_problem(rng, w, h);
  if (op == "photometric") return photometric_problem(rng, w, h);
  if (op == "smoothness") return smoothness_problem(rng, w, h, trial % 2 == 0 ? 1 : 2);
  if (op == "flow_difference") return flow_difference_problem(rng, w, h, false);
  return flow_difference_problem(rng, w, h, true);
}

GradcheckTrial check(Problem& p, const GradcheckOptions& options) {
  GradcheckTrial t;
  t.coordinates = p.x.size();
  double scale = 0.0;
  for (double g : p.grad) scale = std::max(scale, std::abs(g));
  const double floor = std::max(options.floor * scale, 1e-12);
  std::vector<double> x = p.x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double analytic = p.grad[i];
    if (options.corrupt) analytic = analytic * 1.01 + 1e-3;
    x[i] = p.x[i] + options.step;
    const double fp = p.f(x);
    x[i] = p.x[i] - options.step;
    const double fm = p.f(x);
    x[i] = p.x[i];
    const double numeric = (fp - fm) / (2.0 * options.step);
    const double abs_err = std::abs(analytic - numeric);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    t.max_abs_error = std::max(t.max_abs_error, abs_err);
    t.max_rel_error = std::max(t.max_rel_error, abs_err / denom);
  }
  return t;
}

}  // namespace

const std::vector<std::string>& gradcheck_op_names() {
  static const std::vector<std::string> names{"bilinear_sample", "inverse_warp", "rigid_flow",
                                              "ssim",           "photometric",  "smoothness",
                                              "flow_difference", "consistency"};
  return names;
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.trials < 1) throw InvalidSpecError("gradcheck.trials", "must be at least 1");
  if (options.width < 2 || options.height < 2) {
    throw InvalidSpecError("gradcheck.size", "width and height must be at least 2");
  }
  if (!(options.step > 0.0)) throw InvalidSpecError("gradcheck.step", "must be positive");
  const auto& all = gradcheck_op_names();
  std::vector<std::string> ops = options.ops.empty() ? all : options.ops;
  for (const std::string& op : ops) {
    if (std::find(all.begin(), all.end(), op) == all.end()) {
      throw InvalidSpecError("gradcheck.op", "unknown op '" + op + "'");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.tolerance = options.tolerance;
  for (const std::string& op : ops) {
    const auto op_index = static_cast<std::uint64_t>(std::find(all.begin(), all.end(), op) - all.begin());
    GradcheckOpReport r;
    r.op = op;
    for (int trial = 0; trial < options.trials; ++trial) {
      Rng rng(options.seed, op_index, static_cast<std::uint64_t>(trial));
      Problem p = make_problem(op, rng, trial, options.width, options.height);
      GradcheckTrial t = check(p, options);
      t.trial = trial;
      r.max_rel_error = std::max(r.max_rel_error, t.max_rel_error);
      r.trials.push_back(t);
    }
    r.passed = r.max_rel_error < options.tolerance;
    report.passed = report.passed && r.passed;
    report.ops.push_back(std::move(r));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string GradcheckReport::to_text(bool per_trial) const {
  std::ostringstream out;
  out << "tolerance " << io::format_double(tolerance) << "\n";
  for (const GradcheckOpReport& r : ops) {
    out << (r.passed ? "PASS " : "FAIL ") << r.op << " trials=" << r.trials.size()
        << " max_rel_error=" << io::format_double(r.max_rel_error) << "\n";
    if (!per_trial) continue;
    out << "  trial coordinates max_rel_error max_abs_error\n";
    for (const GradcheckTrial& t : r.trials) {
      out << "  " << t.trial << " " << t.coordinates << " " << io::format_double(t.max_rel_error)
          << " " << io::format_double(t.max_abs_error) << "\n";
    }
  }
  out << (passed ? "PASS" : "FAIL") << " all\n";
  return out.str();
}

}  // namespace geowarp
