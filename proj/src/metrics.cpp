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

#include "geowarp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "geowarp/errors.hpp"
#include "geowarp/io.hpp"

namespace geowarp {

namespace {

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double hi = *mid;
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

void require_extent(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_extent(b)) throw DimensionError(std::string(what) + ": grid sizes differ");
}

std::string fmt(double v) { return io::format_double(v); }

}  // namespace

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, const Mask& valid,
                           const DepthMetricOptions& options) {
  require_extent(pred, gt, "depth_metrics");
  require_extent(pred, valid, "depth_metrics");
  if (!(options.cap > 0.0)) throw DomainError("depth_metrics: cap must be positive");
  std::vector<double> p;
  std::vector<double> g;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (valid(x, y) <= 0.0) continue;
      if (!(gt(x, y) > 0.0)) throw DomainError("depth_metrics: ground truth must be positive");
      p.push_back(pred(x, y));
      g.push_back(gt(x, y));
    }
  }
  if (p.empty()) throw DegenerateMaskError("depth_metrics: empty valid set");

  DepthMetrics m;
  m.count = p.size();
  if (options.median_scale) m.scale = median(g) / median(p);
  double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0, d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::min(p[i] * m.scale, options.cap);
    const double gi = std::min(g[i], options.cap);
    const double diff = pi - gi;
    abs_rel += std::abs(diff) / gi;
    sq_rel += diff * diff / gi;
    sq += diff * diff;
    const double dl = std::log(pi) - std::log(gi);
    sq_log += dl * dl;
    const double ratio = std::max(pi / gi, gi / pi);
    d1 += ratio < 1.25 ? 1 : 0;
    d2 += ratio < 1.25 * 1.25 ? 1 : 0;
    d3 += ratio < 1.25 * 1.25 * 1.25 ? 1 : 0;
  }
  const double n = static_cast<double>(p.size());
  m.abs_rel = abs_rel / n;
  m.sq_rel = sq_rel / n;
  m.rmse = std::sqrt(sq / n);
  m.rmse_log = std::sqrt(sq_log / n);
  m.delta1 = d1 / n;
  m.delta2 = d2 / n;
  m.delta3 = d3 / n;
  return m;
}

double flow_epe(const FlowField& pred, const FlowField& gt, const Mask& region) {
  require_extent(pred, gt, "flow_epe");
  require_extent(pred, region, "flow_epe");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (region(x, y) <= 0.0) continue;
      sum += std::hypot(pred.u(x, y) - gt.u(x, y), pred.v(x, y) - gt.v(x, y));
      ++n;
    }
  }
  if (n == 0) throw DegenerateMaskError("flow_epe: empty region");
  return sum / static_cast<double>(n);
}

FlowEpe flow_epe_noc_all(const FlowField& pred, const FlowField& gt, const Mask& occlusion) {
  require_extent(gt, occlusion, "flow_epe_noc_all");
  Mask noc(gt.width(), gt.height(), 1.0);
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) noc(x, y) = occlusion(x, y) > 0.0 ? 0.0 : 1.0;
  }
  return {flow_epe(pred, gt, noc), flow_epe(pred, gt, Mask(gt.width(), gt.height(), 1.0))};
}

std::vector<ResidualBin> epe_vs_residual_histogram(const FlowField& pred,
                                                   const FlowField& gt_full,
                                                   const FlowField& gt_rigid, int num_bins,
                                                   double bin_width) {
  require_extent(pred, gt_full, "epe_vs_residual_histogram");
  require_extent(pred, gt_rigid, "epe_vs_residual_histogram");
  if (num_bins < 1 || !(bin_width > 0.0)) {
    throw DomainError("epe_vs_residual_histogram: need num_bins >= 1 and bin_width > 0");
  }
  std::vector<ResidualBin> bins(static_cast<std::size_t>(num_bins));
  std::vector<double> sums(bins.size(), 0.0);
  for (int b = 0; b < num_bins; ++b) {
    bins[b].lower = b * bin_width;
    bins[b].upper = b + 1 == num_bins ? INFINITY : (b + 1) * bin_width;
  }
  for (int y = 0; y < pred.height(); ++y) {
    for (int x = 0; x < pred.width(); ++x) {
      const double r = std::hypot(gt_full.u(x, y) - gt_rigid.u(x, y),
                                  gt_full.v(x, y) - gt_rigid.v(x, y));
      const auto b = static_cast<std::size_t>(
          std::min<double>(std::floor(r / bin_width), num_bins - 1));
      sums[b] += std::hypot(pred.u(x, y) - gt_full.u(x, y), pred.v(x, y) - gt_full.v(x, y));
      ++bins[b].count;
    }
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count > 0) bins[b].mean_epe = sums[b] / static_cast<double>(bins[b].count);
  }
  return bins;
}

Trajectory camera_positions(std::span<const PoseSE3> poses) {
  Trajectory out;
  out.reserve(poses.size());
  for (const PoseSE3& p : poses) out.push_back(-(p.rotation_matrix().transpose() * p.translation));
  return out;
}

std::vector<Trajectory> trajectory_snippets(const Trajectory& positions, int length) {
  if (length < 2) throw DomainError("trajectory_snippets: length must be at least 2");
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(length) <= positions.size(); ++i) {
    out.emplace_back(positions.begin() + static_cast<std::ptrdiff_t>(i),
                     positions.begin() + static_cast<std::ptrdiff_t>(i + length));
  }
  return out;
}

double ate_snippet(const Trajectory& pred, const Trajectory& gt, double* scale) {
  if (pred.size() != gt.size()) throw DimensionError("ate: trajectory lengths differ");
  if (pred.size() < 2) throw DomainError("ate: need at least 2 positions");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred[i].allFinite() || !gt[i].allFinite()) throw DomainError("ate: non-finite position");
  }
  double dot = 0.0, pp = 0.0, gg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Point3D p = pred[i] - pred[0];
    const Point3D g = gt[i] - gt[0];
    dot += p.dot(g);
    pp += p.squaredNorm();
    gg += g.squaredNorm();
  }
  double s = 1.0;
  if (pp > 0.0) {
    s = dot / pp;
  } else if (gg > 0.0) {
    throw DomainError("ate: predicted trajectory has no extent");
  }
  if (scale != nullptr) *scale = s;
  double err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    err += (s * (pred[i] - pred[0]) - (gt[i] - gt[0])).norm();
  }
  return err / static_cast<double>(pred.size());
}

AteSummary ate(std::span<const Trajectory> pred, std::span<const Trajectory> gt) {
  if (pred.size() != gt.size()) throw DimensionError("ate: snippet counts differ");
  if (pred.empty()) throw DomainError("ate: no snippets");
  std::vector<double> errs;
  for (std::size_t i = 0; i < pred.size(); ++i) errs.push_back(ate_snippet(pred[i], gt[i]));
  AteSummary a;
  a.snippets = errs.size();
  for (double e : errs) a.mean += e;
  a.mean /= static_cast<double>(errs.size());
  for (double e : errs) a.std += (e - a.mean) * (e - a.mean);
  a.std = std::sqrt(a.std / static_cast<double>(errs.size()));
  return a;
}

std::string to_text(const DepthMetrics& m) {
  return "abs_rel = " + fmt(m.abs_rel) + "\nsq_rel = " + fmt(m.sq_rel) + "\nrmse = " +
         fmt(m.rmse) + "\nrmse_log = " + fmt(m.rmse_log) + "\ndelta1 = " + fmt(m.delta1) +
         "\ndelta2 = " + fmt(m.delta2) + "\ndelta3 = " + fmt(m.delta3) + "\nscale = " +
         fmt(m.scale) + "\ncount = " + std::to_string(m.count) + "\n";
}

std::string to_csv(const DepthMetrics& m) {
  return "abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,scale,count\n" + fmt(m.abs_rel) +
         "," + fmt(m.sq_rel) + "," + fmt(m.rmse) + "," + fmt(m.rmse_log) + "," + fmt(m.delta1) +
         "," + fmt(m.delta2) + "," + fmt(m.delta3) + "," + fmt(m.scale) + "," +
         std::to_string(m.count) + "\n";
}

std::string to_text(const FlowEpe& e) {
  return "epe_noc = " + fmt(e.noc) + "\nepe_all = " + fmt(e.all) + "\n";
}

std::string to_csv(const FlowEpe& e) {
  return "epe_noc,epe_all\n" + fmt(e.noc) + "," + fmt(e.all) + "\n";
}

std::string to_text(const AteSummary& a) {
  return "ate_mean = " + fmt(a.mean) + "\nate_std = " + fmt(a.std) +
         "\nsnippets = " + std::to_string(a.snippets) + "\n";
}

std::string to_csv(const AteSummary& a) {
  return "ate_mean,ate_std,snippets\n" + fmt(a.mean) + "," + fmt(a.std) + "," +
         std::to_string(a.snippets) + "\n";
}

std::string histogram_csv(std::span<const ResidualBin> bins) {
  std::string out = "lower,upper,count,mean_epe\n";
  for (const ResidualBin& b : bins) {
    out += fmt(b.lower) + "," + (std::isinf(b.upper) ? std::string("inf") : fmt(b.upper)) + "," +
           std::to_string(b.count) + "," + (b.count > 0 ? fmt(b.mean_epe) : std::string("")) +
           "\n";
  }
  return out;
}

}  // namespace geowarp
