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

#include "geowarp/losses.hpp"

#include <algorithm>
#include <cmath>

#include "geowarp/errors.hpp"

namespace geowarp {

namespace {

// Subgradient of |v|. Differences within rounding noise of zero count as
// zero, so an exact solution is a fixed point of the optimizer.
constexpr double kRoundingBand = 1e-12;
double sign(double v) { return v > kRoundingBand ? 1.0 : (v < -kRoundingBand ? -1.0 : 0.0); }

// Sum of three neighbours along one axis with replicate padding. `stride` and
// `count` describe the axis in units of doubles; `lines` and `line_stride` the
// other one. With `adjoint` set, each value is scattered instead of gathered.
void box_pass(const double* in, double* out, int count, std::size_t stride, int lines,
              std::size_t line_stride, int channels, bool adjoint) {
  for (int l = 0; l < lines; ++l) {
    for (int c = 0; c < channels; ++c) {
      const double* src = in + l * line_stride + c;
      double* dst = out + l * line_stride + c;
      for (int i = 0; i < count; ++i) {
        const int lo = std::max(i - 1, 0);
        const int hi = std::min(i + 1, count - 1);
        if (adjoint) {
          const double v = src[i * stride];
          dst[lo * stride] += v;
          dst[i * stride] += v;
          dst[hi * stride] += v;
        } else {
          dst[i * stride] = src[lo * stride] + src[i * stride] + src[hi * stride];
        }
      }
    }
  }
}

// 3x3 mean with replicate padding, applied per channel.
Grid box3(const Grid& g) {
  const int w = g.width(), h = g.height(), c = g.channels();
  const std::size_t row = static_cast<std::size_t>(w) * c;
  Grid tmp(w, h, c);
  Grid out(w, h, c);
  box_pass(g.values().data(), tmp.values().data(), w, c, h, row, c, false);
  box_pass(tmp.values().data(), out.values().data(), h, row, w, c, c, false);
  for (double& v : out.values()) v /= 9.0;
  return out;
}

// Adjoint of box3.
Grid box3_adjoint(const Grid& g) {
  const int w = g.width(), h = g.height(), c = g.channels();
  const std::size_t row = static_cast<std::size_t>(w) * c;
  Grid tmp(w, h, c);
  Grid out(w, h, c);
  box_pass(g.values().data(), tmp.values().data(), h, row, w, c, c, true);
  box_pass(tmp.values().data(), out.values().data(), w, c, h, row, c, true);
  for (double& v : out.values()) v /= 9.0;
  return out;
}

Grid multiply(const Grid& a, const Grid& b) {
  Grid out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
  return out;
}

struct SsimStats {
  Grid mu_a, mu_b, var_a, var_b, cov_ab;
};

SsimStats ssim_stats(const Grid& a, const Grid& b) {
  SsimStats s{box3(a), box3(b), box3(multiply(a, a)), box3(multiply(b, b)),
              box3(multiply(a, b))};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ma = s.mu_a.values()[i];
    const double mb = s.mu_b.values()[i];
    s.var_a.values()[i] -= ma * ma;
    s.var_b.values()[i] -= mb * mb;
    s.cov_ab.values()[i] -= ma * mb;
  }
  return s;
}

void require_same(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": shape mismatch");
}

struct PhotometricSetup {
  Grid weight;       // one channel
  double weight_sum = 0.0;
  Image effective;   // warped, with zero-weight pixels replaced by the target
};

PhotometricSetup photometric_setup(const Image& target, const WarpResult& warped,
                                   const Mask* weight_mask) {
  require_same(target, warped.warped, "photometric_loss");
  if (!target.same_extent(warped.valid) ||
      (weight_mask != nullptr && !target.same_extent(*weight_mask))) {
    throw DimensionError("photometric_loss: mask extent mismatch");
  }
  PhotometricSetup s{Grid(target.width(), target.height(), 1), 0.0, warped.warped};
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < target.width(); ++x) {
      double w = warped.valid(x, y);
      if (weight_mask != nullptr) w *= (*weight_mask)(x, y);
      s.weight(x, y) = w;
      s.weight_sum += w;
      if (w == 0.0) {
        for (int c = 0; c < target.channels(); ++c) s.effective(x, y, c) = target(x, y, c);
      }
    }
  }
  if (!(s.weight_sum > 0.0)) {
    throw DegenerateMaskError("photometric_loss: effective weights sum to zero");
  }
  return s;
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha_ssim >= 0.0 && alpha_ssim <= 1.0)) throw InvalidSpecError("loss.alpha_ssim", "must be in [0, 1]");
  if (!(lambda_ds >= 0.0)) throw InvalidSpecError("loss.lambda_ds", "must be nonnegative");
  if (!(lambda_fs >= 0.0)) throw InvalidSpecError("loss.lambda_fs", "must be nonnegative");
  if (!(lambda_gc >= 0.0)) throw InvalidSpecError("loss.lambda_gc", "must be nonnegative");
  if (num_scales < 1) throw InvalidSpecError("loss.num_scales", "must be at least 1");
}

Grid ssim_map(const Image& a, const Image& b) {
  require_same(a, b, "ssim_map");
  const SsimStats s = ssim_stats(a, b);
  Grid out(a.width(), a.height(), a.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double ma = s.mu_a.values()[i], mb = s.mu_b.values()[i];
    const double n1 = 2.0 * ma * mb + kSsimC1;
    const double n2 = 2.0 * s.cov_ab.values()[i] + kSsimC2;
    const double d1 = ma * ma + mb * mb + kSsimC1;
    const double d2 = s.var_a.values()[i] + s.var_b.values()[i] + kSsimC2;
    out.values()[i] = (n1 * n2) / (d1 * d2);
  }
  return out;
}

Grid ssim_map_vjp(const Image& a, const Image& b, const Grid& upstream) {
  require_same(a, b, "ssim_map_vjp");
  require_same(a, upstream, "ssim_map_vjp");
  const SsimStats s = ssim_stats(a, b);
  // Cotangents of the window statistics of b.
  Grid g_mu(a.width(), a.height(), a.channels());
  Grid g_var(a.width(), a.height(), a.channels());
  Grid g_cov(a.width(), a.height(), a.channels());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double up = upstream.values()[i];
    if (up == 0.0) continue;
    const double ma = s.mu_a.values()[i], mb = s.mu_b.values()[i];
    const double n1 = 2.0 * ma * mb + kSsimC1;
    const double n2 = 2.0 * s.cov_ab.values()[i] + kSsimC2;
    const double d1 = ma * ma + mb * mb + kSsimC1;
    const double d2 = s.var_a.values()[i] + s.var_b.values()[i] + kSsimC2;
    const double ssim = (n1 * n2) / (d1 * d2);
    const double ds_dmu = (2.0 * ma * n2) / (d1 * d2) - ssim * 2.0 * mb / d1;
    const double ds_dvar = -ssim / d2;
    const double ds_dcov = 2.0 * n1 / (d1 * d2);
    // var_b = E[b^2] - mu_b^2 and cov = E[ab] - mu_a mu_b feed back into mu_b.
    g_mu.values()[i] = up * (ds_dmu - 2.0 * mb * ds_dvar - ma * ds_dcov);
    g_var.values()[i] = up * ds_dvar;
    g_cov.values()[i] = up * ds_dcov;
  }
  const Grid t_mu = box3_adjoint(g_mu);
  const Grid t_var = box3_adjoint(g_var);
  const Grid t_cov = box3_adjoint(g_cov);
  Grid grad(a.width(), a.height(), a.channels());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad.values()[i] = t_mu.values()[i] + 2.0 * b.values()[i] * t_var.values()[i] +
                       a.values()[i] * t_cov.values()[i];
  }
  return grad;
}

double photometric_loss(const Image& target, const WarpResult& warped, const Mask* weight_mask,
                        double alpha_ssim) {
  const PhotometricSetup s = photometric_setup(target, warped, weight_mask);
  const Grid ssim = ssim_map(target, s.effective);
  const int ch = target.channels();
  double acc = 0.0;
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < target.width(); ++x) {
      const double w = s.weight(x, y);
      if (w == 0.0) continue;
      double e = 0.0;
      for (int c = 0; c < ch; ++c) {
        e += alpha_ssim * 0.5 * (1.0 - ssim(x, y, c)) +
             (1.0 - alpha_ssim) * std::abs(target(x, y, c) - s.effective(x, y, c));
      }
      acc += w * e / ch;
    }
  }
  return acc / s.weight_sum;
}

Grid photometric_loss_vjp(const Image& target, const WarpResult& warped, const Mask* weight_mask,
                          double alpha_ssim) {
  const PhotometricSetup s = photometric_setup(target, warped, weight_mask);
  const int ch = target.channels();
  const double norm = 1.0 / (ch * s.weight_sum);
  Grid up_ssim(target.width(), target.height(), ch);
  Grid grad(target.width(), target.height(), ch);
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < target.width(); ++x) {
      const double w = s.weight(x, y);
      if (w == 0.0) continue;
      for (int c = 0; c < ch; ++c) {
        up_ssim(x, y, c) = -0.5 * alpha_ssim * w * norm;
        grad(x, y, c) =
            (1.0 - alpha_ssim) * w * norm * sign(s.effective(x, y, c) - target(x, y, c));
      }
    }
  }
  const Grid g_ssim = ssim_map_vjp(target, s.effective, up_ssim);
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < target.width(); ++x) {
      const bool kept = s.weight(x, y) != 0.0;
      for (int c = 0; c < ch; ++c) {
        grad(x, y, c) = kept ? grad(x, y, c) + g_ssim(x, y, c) : 0.0;
      }
    }
  }
  return grad;
}

double edge_aware_smoothness(const Grid& field, const Image& guide) {
  if (!field.same_extent(guide)) throw DimensionError("edge_aware_smoothness: extent mismatch");
  const int w = field.width(), h = field.height();
  if (w < 2 || h < 2) return 0.0;
  const int gc = guide.channels();
  double acc = 0.0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      double ix = 0.0, iy = 0.0;
      for (int c = 0; c < gc; ++c) {
        ix += std::abs(guide(x + 1, y, c) - guide(x, y, c));
        iy += std::abs(guide(x, y + 1, c) - guide(x, y, c));
      }
      const double wx = std::exp(-ix / gc);
      const double wy = std::exp(-iy / gc);
      for (int c = 0; c < field.channels(); ++c) {
        acc += std::abs(field(x + 1, y, c) - field(x, y, c)) * wx +
               std::abs(field(x, y + 1, c) - field(x, y, c)) * wy;
      }
    }
  }
  return acc / (static_cast<double>(w - 1) * (h - 1));
}

Grid edge_aware_smoothness_vjp(const Grid& field, const Image& guide) {
  if (!field.same_extent(guide)) throw DimensionError("edge_aware_smoothness: extent mismatch");
  const int w = field.width(), h = field.height();
  Grid grad(w, h, field.channels());
  if (w < 2 || h < 2) return grad;
  const int gc = guide.channels();
  const double norm = 1.0 / (static_cast<double>(w - 1) * (h - 1));
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      double ix = 0.0, iy = 0.0;
      for (int c = 0; c < gc; ++c) {
        ix += std::abs(guide(x + 1, y, c) - guide(x, y, c));
        iy += std::abs(guide(x, y + 1, c) - guide(x, y, c));
      }
      const double wx = std::exp(-ix / gc) * norm;
      const double wy = std::exp(-iy / gc) * norm;
      for (int c = 0; c < field.channels(); ++c) {
        const double sx = sign(field(x + 1, y, c) - field(x, y, c)) * wx;
        const double sy = sign(field(x, y + 1, c) - field(x, y, c)) * wy;
        grad(x + 1, y, c) += sx;
        grad(x, y + 1, c) += sy;
        grad(x, y, c) -= sx + sy;
      }
    }
  }
  return grad;
}

double geometric_consistency_loss(const FlowField& delta, const Mask& inlier) {
  if (!delta.same_extent(inlier)) throw DimensionError("geometric_consistency_loss: extent mismatch");
  double acc = 0.0, wsum = 0.0;
  for (int y = 0; y < delta.height(); ++y) {
    for (int x = 0; x < delta.width(); ++x) {
      const double m = inlier(x, y);
      if (m == 0.0) continue;
      acc += m * (std::abs(delta.u(x, y)) + std::abs(delta.v(x, y)));
      wsum += m;
    }
  }
  if (!(wsum > 0.0)) throw DegenerateMaskError("geometric_consistency_loss: no inlier pixels");
  return acc / wsum;
}

Grid geometric_consistency_loss_vjp(const FlowField& delta, const Mask& inlier) {
  if (!delta.same_extent(inlier)) throw DimensionError("geometric_consistency_loss: extent mismatch");
  const double wsum = inlier.sum();
  if (!(wsum > 0.0)) throw DegenerateMaskError("geometric_consistency_loss: no inlier pixels");
  Grid grad(delta.width(), delta.height(), 2);
  for (int y = 0; y < delta.height(); ++y) {
    for (int x = 0; x < delta.width(); ++x) {
      const double m = inlier(x, y) / wsum;
      grad(x, y, 0) = m * sign(delta.u(x, y));
      grad(x, y, 1) = m * sign(delta.v(x, y));
    }
  }
  return grad;
}

}  // namespace geowarp
