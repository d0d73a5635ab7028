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

#include <cmath>

#include "doctest.h"
#include "geowarp/consistency.hpp"
#include "geowarp/errors.hpp"
#include "geowarp/rigid_geometry.hpp"
#include "geowarp/synthetic_scenes.hpp"
#include "oracles.hpp"

using namespace geowarp;

TEST_SUITE("consistency") {
  TEST_CASE("params validate") {
    CHECK_NOTHROW(ConsistencyParams{}.validate());
    CHECK_THROWS_AS((ConsistencyParams{0.0, 0.05}.validate()), InvalidSpecError);
    CHECK_THROWS_AS((ConsistencyParams{3.0, -0.1}.validate()), InvalidSpecError);
  }

  TEST_CASE("zero flows give zero difference") {
    const FlowDifference d = flow_difference(FlowField(8, 6), FlowField(8, 6));
    for (double v : d.delta.values()) CHECK(v == 0.0);
    CHECK(d.valid.count_nonzero() == 48);
  }

  TEST_CASE("exact inverse flows cancel, border invalid") {
    const FlowDifference d = flow_difference(FlowField(12, 4, 5, 0), FlowField(12, 4, -5, 0));
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 12; ++x) {
        if (x + 5 <= 11) {
          CHECK(d.valid(x, y) == 1.0);
          CHECK(d.delta.u(x, y) == 0.0);
          CHECK(d.delta.v(x, y) == 0.0);
        } else {
          CHECK(d.valid(x, y) == 0.0);
        }
      }
    }
  }

  TEST_CASE("constant mismatch") {
    const FlowDifference d = flow_difference(FlowField(12, 4, 5, 0), FlowField(12, 4, -3, 0));
    for (int x = 0; x < 7; ++x) {
      CHECK(d.delta.u(x, 2) == 2.0);
      CHECK(d.delta.v(x, 2) == 0.0);
    }
  }

  TEST_CASE("difference matches the bilinear oracle") {
    auto g = oracle::rng(50);
    const FlowField f(oracle::random_grid(g, 9, 7, 2, -2, 2));
    const FlowField b(oracle::random_grid(g, 9, 7, 2, -2, 2));
    const FlowDifference d = flow_difference(f, b);
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 9; ++x) {
        const double xs = x + f.u(x, y);
        const double ys = y + f.v(x, y);
        const bool inside = xs >= 0 && xs <= 8 && ys >= 0 && ys <= 6;
        CHECK(d.valid(x, y) == (inside ? 1.0 : 0.0));
        if (!inside) continue;
        CHECK(d.delta.u(x, y) == doctest::Approx(f.u(x, y) + oracle::bilinear(b, xs, ys, 0)).epsilon(1e-13));
        CHECK(d.delta.v(x, y) == doctest::Approx(f.v(x, y) + oracle::bilinear(b, xs, ys, 1)).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("inlier thresholds") {
    const ConsistencyParams p{3.0, 0.05};
    CHECK(inlier_mask(FlowField(4, 4), FlowField(4, 4, 10, 0), p).count_nonzero() == 16);
    // |delta| = 3 exactly with |f| = 10: strict test rejects.
    CHECK(inlier_mask(FlowField(4, 4, 3, 0), FlowField(4, 4, 6, 8), p).count_nonzero() == 0);
    // |delta| = 4 with |f| = 100: threshold is 5.
    CHECK(inlier_mask(FlowField(4, 4, 0, 4), FlowField(4, 4, 60, 80), p).count_nonzero() == 16);
    CHECK(inlier_mask(FlowField(4, 4, 0, 5), FlowField(4, 4, 60, 80), p).count_nonzero() == 0);
  }

  TEST_CASE("out-of-grid lookups are outliers") {
    const FlowDifference d = flow_difference(FlowField(6, 3, 4, 0), FlowField(6, 3, -4, 0));
    const Mask m = inlier_mask(d, FlowField(6, 3, 4, 0), ConsistencyParams{});
    for (int x = 0; x < 6; ++x) CHECK(m(x, 1) == (x <= 1 ? 1.0 : 0.0));
  }

  TEST_CASE("inlier mask is monotone in alpha") {
    auto g = oracle::rng(51);
    for (int k = 0; k < 20; ++k) {
      const FlowField delta(oracle::random_grid(g, 10, 10, 2, -5, 5));
      const FlowField f(oracle::random_grid(g, 10, 10, 2, -60, 60));
      const double a = oracle::uniform(g, 0.5, 4);
      const Mask lo = inlier_mask(delta, f, {a, 0.05});
      const Mask hi = inlier_mask(delta, f, {a + oracle::uniform(g, 0, 3), 0.05});
      for (std::size_t i = 0; i < lo.size(); ++i) CHECK(lo.values()[i] <= hi.values()[i]);
    }
  }

  TEST_CASE("relative regime is scale invariant") {
    auto g = oracle::rng(52);
    const ConsistencyParams p{3.0, 0.05};
    for (int k = 0; k < 20; ++k) {
      const FlowField delta(oracle::random_grid(g, 8, 8, 2, -8, 8));
      const FlowField f(oracle::random_grid(g, 8, 8, 2, -200, 200));
      const double s = oracle::uniform(g, 1.0, 4.0);
      FlowField ds = delta;
      FlowField fs = f;
      for (double& v : ds.values()) v *= s;
      for (double& v : fs.values()) v *= s;
      const Mask a = inlier_mask(delta, f, p);
      const Mask b = inlier_mask(ds, fs, p);
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          if (p.beta_rel * std::hypot(f.u(x, y), f.v(x, y)) > p.alpha_px) CHECK(a(x, y) == b(x, y));
        }
      }
    }
  }

  TEST_CASE("vjp matches central differences") {
    auto g = oracle::rng(53);
    for (int k = 0; k < 10; ++k) {
      FlowField f(8, 6);
      for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 8; ++x) {
          f.u(x, y) = oracle::off_knot(g, 0, 7) - x;
          f.v(x, y) = oracle::off_knot(g, 0, 5) - y;
        }
      }
      const FlowField b(oracle::random_grid(g, 8, 6, 2, -2, 2));
      const Grid w = oracle::random_grid(g, 8, 6, 2, -1, 1);
      auto obj = [&](const FlowField& ff, const FlowField& bb) {
        const FlowDifference d = flow_difference(ff, bb);
        double s = 0;
        for (std::size_t i = 0; i < w.size(); ++i) s += w.values()[i] * d.delta.values()[i];
        return s;
      };
      const FlowDifferenceGradient grad = flow_difference_vjp(f, b, w);
      const double h = 1e-6;
      for (std::size_t i = 0; i < f.size(); ++i) {
        FlowField a = f;
        FlowField c = f;
        a.values()[i] += h;
        c.values()[i] -= h;
        CHECK(oracle::rel_error(grad.d_fwd.values()[i], (obj(a, b) - obj(c, b)) / (2 * h), 1e-6) < 1e-4);
        FlowField ba = b;
        FlowField bc = b;
        ba.values()[i] += h;
        bc.values()[i] -= h;
        CHECK(oracle::rel_error(grad.d_bwd.values()[i], (obj(f, ba) - obj(f, bc)) / (2 * h), 1e-6) < 1e-4);
      }
    }
  }

  TEST_CASE("static scene ground truth is almost all inlier") {
    SceneSpec s;
    s.seed = 8;
    s.layout = SceneLayout::slanted;
    s.slant_x = 0.05;
    s.slant_y = 0.05;
    s.poses = {PoseSE3{}, PoseSE3::from_vector({0.01, -0.01, 0.005, 0.3, 0.1, 0.2})};
    const Scene sc = generate_scene(s);
    const PairTruth& f = sc.truth(0, 1);
    const PairTruth& b = sc.truth(1, 0);
    const Mask m = inlier_mask(flow_difference(f.full, b.full), f.full, ConsistencyParams{});
    double interior = 0;
    double inliers = 0;
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        if (f.in_frame(x, y) == 0.0) continue;
        ++interior;
        inliers += m(x, y);
      }
    }
    CHECK(inliers / interior >= 0.99);
  }
}
