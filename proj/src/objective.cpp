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

#include "geowarp/objective.hpp"

#include <sstream>

#include "geowarp/errors.hpp"
#include "geowarp/io.hpp"
#include "geowarp/parallel.hpp"
#include "geowarp/warping.hpp"

namespace geowarp {

namespace {

void add_into(Grid& dst, const Grid& src) {
  if (src.empty()) return;
  if (dst.empty()) {
    dst = src;
    return;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst.values()[i] += src.values()[i];
}

Grid scaled(Grid g, double s) {
  for (double& v : g.values()) v *= s;
  return g;
}

// Per-pair partial gradients, reduced serially afterwards.
struct PairGradients {
  Grid d_rigid;          // from l_rw only
  Grid d_full;           // from l_fw and the pair's own l_gc (forward side)
  Grid d_full_of_other;  // l_gc backward side, belongs to the reverse pair
  Grid d_residual;       // smoothness of the residual flow
  Grid d_depth;          // smoothness of the target depth
};

void validate_inputs(const ScaleInputs& in) {
  in.intrinsics.validate();
  if (in.frames.empty()) throw DomainError("objective needs at least one frame");
  if (in.depth.size() != in.frames.size()) {
    throw DimensionError("objective: one depth map per frame required");
  }
  if (in.poses.size() != in.pairs.size()) {
    throw DimensionError("objective: one pose per directed pair required");
  }
  if (!in.residual.empty() && in.residual.size() != in.pairs.size()) {
    throw DimensionError("objective: residual flows must be given for every pair or none");
  }
  const Image& ref = in.frames.front();
  for (std::size_t f = 0; f < in.frames.size(); ++f) {
    if (!in.frames[f].same_shape(ref) || !in.depth[f].same_extent(ref)) {
      throw DimensionError("objective: frames/depths differ in shape");
    }
  }
  for (const auto& r : in.residual) {
    if (!r.same_extent(ref)) throw DimensionError("objective: residual flow extent mismatch");
  }
  const int n = static_cast<int>(in.frames.size());
  for (const auto& p : in.pairs) {
    if (p.target < 0 || p.target >= n || p.source < 0 || p.source >= n || p.target == p.source) {
      throw DomainError("objective: invalid frame pair");
    }
  }
}

}  // namespace

std::vector<DirectedPair> adjacent_pairs(int num_frames) {
  std::vector<DirectedPair> pairs;
  for (int f = 0; f + 1 < num_frames; ++f) {
    pairs.push_back({f, f + 1});
    pairs.push_back({f + 1, f});
  }
  return pairs;
}

std::size_t reverse_pair_index(std::span<const DirectedPair> pairs, std::size_t i) {
  const DirectedPair want{pairs[i].source, pairs[i].target};
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    if (pairs[j] == want) return j;
  }
  throw DomainError("pair (" + std::to_string(want.source) + "," + std::to_string(want.target) +
                    ") has no reverse direction");
}

ScaleBreakdown& ScaleBreakdown::operator+=(const ScaleBreakdown& o) {
  l_rw += o.l_rw;
  l_ds += o.l_ds;
  l_fw += o.l_fw;
  l_fs += o.l_fs;
  l_gc += o.l_gc;
  return *this;
}

double weighted_total(const ScaleBreakdown& b, const LossWeights& w) {
  return b.l_rw + w.lambda_ds * b.l_ds + b.l_fw + w.lambda_fs * b.l_fs + w.lambda_gc * b.l_gc;
}

double selected_total(const ScaleBreakdown& b, const LossWeights& w, const TermSelection& terms) {
  double t = 0.0;
  if (terms.rigid) t += b.l_rw + w.lambda_ds * b.l_ds;
  if (terms.residual) t += b.l_fw + w.lambda_fs * b.l_fs + w.lambda_gc * b.l_gc;
  return t;
}

std::string LossBreakdown::to_text() const {
  std::ostringstream out;
  out << "l_rw = " << io::format_double(l_rw) << '\n'
      << "l_ds = " << io::format_double(l_ds) << '\n'
      << "l_fw = " << io::format_double(l_fw) << '\n'
      << "l_fs = " << io::format_double(l_fs) << '\n'
      << "l_gc = " << io::format_double(l_gc) << '\n'
      << "total = " << io::format_double(total) << '\n';
  for (std::size_t s = 0; s < per_scale.size(); ++s) {
    const ScaleBreakdown& b = per_scale[s];
    const std::string p = "scale" + std::to_string(s) + ".";
    out << p << "l_rw = " << io::format_double(b.l_rw) << '\n'
        << p << "l_ds = " << io::format_double(b.l_ds) << '\n'
        << p << "l_fw = " << io::format_double(b.l_fw) << '\n'
        << p << "l_fs = " << io::format_double(b.l_fs) << '\n'
        << p << "l_gc = " << io::format_double(b.l_gc) << '\n';
  }
  return out.str();
}

ScaleBreakdown evaluate_scale(const ScaleInputs& in, const ObjectiveOptions& options,
                              ScaleGradients* grad, std::vector<PairFields>* fields_out) {
  validate_inputs(in);
  options.weights.validate();
  const std::size_t n = in.pairs.size();
  const double alpha = options.weights.alpha_ssim;
  const int w = in.frames.front().width();
  const int h = in.frames.front().height();

  std::vector<std::size_t> reverse(n);
  for (std::size_t i = 0; i < n; ++i) reverse[i] = reverse_pair_index(in.pairs, i);

  std::vector<PairFields> fields(n);
  parallel_for(n, options.threads, [&](std::size_t i) {
    RigidFlow rf = rigid_flow(in.depth[in.pairs[i].target], in.poses[i], in.intrinsics);
    fields[i].full = in.residual.empty() ? rf.flow : rf.flow + in.residual[i];
    fields[i].rigid = std::move(rf.flow);
    fields[i].rigid_valid = std::move(rf.valid);
  });
  parallel_for(n, options.threads, [&](std::size_t i) {
    fields[i].difference = flow_difference(fields[i].full, fields[reverse[i]].full);
    fields[i].inlier = options.mask_mode == MaskMode::adaptive
                           ? inlier_mask(fields[i].difference, fields[i].full, options.consistency)
                           : Mask(w, h, 1.0);
  });

  std::vector<ScaleBreakdown> terms(n);
  std::vector<PairGradients> pg(grad != nullptr ? n : 0);
  const FlowField zero_flow(w, h);

  parallel_for(n, options.threads, [&](std::size_t i) {
    const PairFields& f = fields[i];
    const Image& target = in.frames[in.pairs[i].target];
    const Image& source = in.frames[in.pairs[i].source];
    const DepthMap& depth = in.depth[in.pairs[i].target];
    const FlowField& residual = in.residual.empty() ? zero_flow : in.residual[i];

    Mask fw_weight = f.inlier;
    for (std::size_t k = 0; k < fw_weight.size(); ++k) {
      fw_weight.values()[k] *= f.rigid_valid.values()[k];
    }

    const WarpResult warp_rigid = inverse_warp(source, f.rigid);
    const WarpResult warp_full = inverse_warp(source, f.full);
    ScaleBreakdown& b = terms[i];
    b.l_rw = photometric_loss(target, warp_rigid, &f.rigid_valid, alpha);
    b.l_ds = edge_aware_smoothness(depth, target);
    b.l_fw = photometric_loss(target, warp_full, &fw_weight, alpha);
    b.l_fs = edge_aware_smoothness(residual, target);
    b.l_gc = geometric_consistency_loss(f.difference.delta, f.inlier);

    if (grad == nullptr) return;
    PairGradients& g = pg[i];
    const LossWeights& lw = options.weights;
    if (options.terms.rigid) {
      const Grid up = photometric_loss_vjp(target, warp_rigid, &f.rigid_valid, alpha);
      g.d_rigid = inverse_warp_vjp(source, f.rigid, up).d_flow;
      g.d_depth = scaled(edge_aware_smoothness_vjp(depth, target), lw.lambda_ds);
    }
    if (options.terms.residual) {
      const Grid up = photometric_loss_vjp(target, warp_full, &fw_weight, alpha);
      g.d_full = inverse_warp_vjp(source, f.full, up).d_flow;
      g.d_residual = scaled(edge_aware_smoothness_vjp(residual, target), lw.lambda_fs);
      const Grid up_delta =
          scaled(geometric_consistency_loss_vjp(f.difference.delta, f.inlier), lw.lambda_gc);
      FlowDifferenceGradient fd = flow_difference_vjp(f.full, fields[reverse[i]].full, up_delta);
      add_into(g.d_full, fd.d_fwd);
      g.d_full_of_other = std::move(fd.d_bwd);
    }
  });

  ScaleBreakdown total;
  for (const auto& t : terms) total += t;

  if (grad != nullptr) {
    // d/d full for each pair, then split into residual and rigid parts.
    std::vector<Grid> d_full(n);
    for (std::size_t i = 0; i < n; ++i) add_into(d_full[i], pg[i].d_full);
    for (std::size_t i = 0; i < n; ++i) add_into(d_full[reverse[i]], pg[i].d_full_of_other);

    grad->d_residual.assign(n, Grid(w, h, 2));
    std::vector<Grid> d_rigid(n, Grid(w, h, 2));
    for (std::size_t i = 0; i < n; ++i) {
      add_into(grad->d_residual[i], d_full[i]);
      add_into(grad->d_residual[i], pg[i].d_residual);
      add_into(d_rigid[i], pg[i].d_rigid);
      add_into(d_rigid[i], d_full[i]);
    }

    std::vector<RigidFlowGradient> rg(n);
    parallel_for(n, options.threads, [&](std::size_t i) {
      rg[i] = rigid_flow_vjp(in.depth[in.pairs[i].target], in.poses[i], in.intrinsics, d_rigid[i]);
    });
    grad->d_depth.assign(in.frames.size(), Grid(w, h, 1));
    grad->d_pose.assign(n, PoseVector{});
    for (std::size_t i = 0; i < n; ++i) {
      Grid& dd = grad->d_depth[in.pairs[i].target];
      add_into(dd, rg[i].d_depth);
      add_into(dd, pg[i].d_depth);
      grad->d_pose[i] = rg[i].d_pose;
    }
  }
  if (fields_out != nullptr) *fields_out = std::move(fields);
  return total;
}

LossBreakdown total_loss(const PredictionSet& set, const ObjectiveOptions& options) {
  options.weights.validate();
  const int scales = options.weights.num_scales;
  if (set.depth.size() != set.frames.size()) {
    throw DimensionError("total_loss: one depth pyramid per frame required");
  }
  LossBreakdown out;
  for (int l = 0; l < scales; ++l) {
    std::vector<Image> frames;
    std::vector<DepthMap> depth;
    std::vector<FlowField> residual;
    for (std::size_t f = 0; f < set.frames.size(); ++f) {
      if (static_cast<int>(set.frames[f].num_scales()) <= l ||
          static_cast<int>(set.depth[f].size()) <= l) {
        throw DimensionError("total_loss: prediction set has fewer scales than num_scales");
      }
      frames.push_back(set.frames[f][l]);
      depth.push_back(set.depth[f][l]);
    }
    for (const auto& r : set.residual) {
      if (static_cast<int>(r.size()) <= l) {
        throw DimensionError("total_loss: residual flow missing a scale");
      }
      residual.push_back(r[l]);
    }
    const ScaleInputs in{frames, depth, set.pairs, set.poses, residual,
                         set.intrinsics.at_level(l)};
    const ScaleBreakdown b = evaluate_scale(in, options);
    out.per_scale.push_back(b);
    out.l_rw += b.l_rw;
    out.l_ds += b.l_ds;
    out.l_fw += b.l_fw;
    out.l_fs += b.l_fs;
    out.l_gc += b.l_gc;
  }
  const LossWeights& w = options.weights;
  out.total = out.l_rw + w.lambda_ds * out.l_ds + out.l_fw + w.lambda_fs * out.l_fs +
              w.lambda_gc * out.l_gc;
  return out;
}

}  // namespace geowarp
