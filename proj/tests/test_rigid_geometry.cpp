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
#include <numbers>

#include <Eigen/Dense>

#include "doctest.h"
#include "geowarp/errors.hpp"
#include "geowarp/rigid_geometry.hpp"
#include "oracles.hpp"

using namespace geowarp;

namespace {

PoseSE3 random_pose(std::mt19937_64& g, double rot, double trans) {
  return PoseSE3::from_vector({oracle::uniform(g, -rot, rot), oracle::uniform(g, -rot, rot),
                               oracle::uniform(g, -rot, rot), oracle::uniform(g, -trans, trans),
                               oracle::uniform(g, -trans, trans),
                               oracle::uniform(g, -trans, trans)});
}

DepthMap random_depth(std::mt19937_64& g, int w, int h, double lo, double hi) {
  std::vector<double> d(static_cast<std::size_t>(w * h));
  for (double& v : d) v = oracle::uniform(g, lo, hi);
  return DepthMap(w, h, std::move(d));
}

const CameraIntrinsics kCam{100.0, 100.0, 50.0, 50.0};

}  // namespace

TEST_SUITE("rigid_geometry") {
  TEST_CASE("euler examples") {
    CHECK(euler_to_rotation({0, 0, 0}) == Eigen::Matrix3d::Identity());
    Eigen::Matrix3d rz;
    rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((euler_to_rotation({0, 0, std::numbers::pi / 2}) - rz).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("rotation order is z after y after x") {
    auto g = oracle::rng(20);
    for (int k = 0; k < 100; ++k) {
      const double a = oracle::uniform(g, -3, 3);
      const double b = oracle::uniform(g, -1.5, 1.5);
      const double c = oracle::uniform(g, -3, 3);
      const Eigen::Matrix3d r = euler_to_rotation({a, b, c});
      const oracle::Mat3 o = oracle::rotation(a, b, c);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(r(i, j) - o[i][j]) < 1e-14);
      CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
      const auto back = rotation_to_euler(r);
      CHECK((euler_to_rotation(back) - r).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("rotation derivatives match differences") {
    auto g = oracle::rng(21);
    const std::array<double, 3> a{oracle::uniform(g, -1, 1), oracle::uniform(g, -1, 1),
                                  oracle::uniform(g, -1, 1)};
    const auto d = euler_rotation_derivatives(a);
    for (int k = 0; k < 3; ++k) {
      auto ap = a;
      auto am = a;
      ap[k] += 1e-6;
      am[k] -= 1e-6;
      const Eigen::Matrix3d num = (euler_to_rotation(ap) - euler_to_rotation(am)) / 2e-6;
      CHECK((num - d[k]).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("pose inverse") {
    const PoseSE3 id = pose_inverse(PoseSE3::identity());
    CHECK(id.matrix() == PoseSE3::identity().matrix());
    PoseSE3 t;
    t.translation = {1, 2, 3};
    const PoseSE3 inv = pose_inverse(t);
    CHECK(inv.translation == Eigen::Vector3d(-1, -2, -3));
    CHECK(inv.rotation_matrix() == Eigen::Matrix3d::Identity());
    auto g = oracle::rng(22);
    for (int k = 0; k < 50; ++k) {
      const PoseSE3 p = random_pose(g, 1.0, 5.0);
      const Matrix34 m = compose(p, pose_inverse(p)).matrix();
      Matrix34 eye = Matrix34::Zero();
      eye.leftCols<3>() = Eigen::Matrix3d::Identity();
      CHECK((m - eye).cwiseAbs().maxCoeff() < 1e-10);
      const Point3D x(oracle::uniform(g, -2, 2), oracle::uniform(g, -2, 2), 4.0);
      const PoseSE3 q = random_pose(g, 1.0, 5.0);
      CHECK((compose(p, q).apply(x) - p.apply(q.apply(x))).norm() < 1e-12);
      CHECK(rotation_distance(p, p) < 1e-7);
      CHECK((PoseSE3::from_matrix(p.matrix()).matrix() - p.matrix()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("rotation distance of a known rotation") {
    const PoseSE3 a;
    const PoseSE3 b = PoseSE3::from_vector({0, 0.3, 0, 0, 0, 0});
    CHECK(rotation_distance(a, b) == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("backprojection and projection examples") {
    CHECK(backproject(50, 50, 7.0, kCam) == Point3D(0, 0, 7.0));
    CHECK((backproject(150, 50, 10.0, kCam) - Point3D(10, 0, 10)).norm() < 1e-12);
    const Projection a = project({0, 0, 5}, kCam);
    CHECK(a.x == 50.0);
    CHECK(a.y == 50.0);
    CHECK(a.in_front);
    const Projection b = project({1, 0, 10}, kCam);
    CHECK(b.x == doctest::Approx(60.0).epsilon(1e-15));
    CHECK(b.y == 50.0);
    CHECK_FALSE(project({0, 0, -1}, kCam).in_front);
    CHECK_FALSE(project({0, 0, kMinProjectionDepth}, kCam).in_front);
    auto g = oracle::rng(23);
    for (int k = 0; k < 100; ++k) {
      const double x = oracle::uniform(g, 0, 99);
      const double y = oracle::uniform(g, 0, 99);
      const Projection p = project(backproject(x, y, oracle::uniform(g, 0.1, 50), kCam), kCam);
      CHECK(std::abs(p.x - x) < 1e-10);
      CHECK(std::abs(p.y - y) < 1e-10);
    }
  }

  TEST_CASE("intrinsics validation and level scaling") {
    CHECK_THROWS_AS((CameraIntrinsics{0, 1, 0, 0}.validate()), DomainError);
    CHECK_THROWS_AS((CameraIntrinsics{1, -1, 0, 0}.validate()), DomainError);
    const CameraIntrinsics l1 = CameraIntrinsics{80, 80, 47.5, 31.5}.at_level(1);
    CHECK(l1.fx == 40.0);
    CHECK(l1.cx == 23.5);  // coarse_from_fine(47.5)
    CHECK(l1.cy == 15.5);
  }

  TEST_CASE("rigid flow closed forms") {
    const RigidFlow id = rigid_flow(DepthMap(12, 8, 3.0), PoseSE3::identity(), kCam);
    for (double v : id.flow.values()) CHECK(v == 0.0);
    CHECK(id.valid.count_nonzero() == 96);

    PoseSE3 tx;
    tx.translation = {1, 0, 0};
    const RigidFlow f = rigid_flow(DepthMap(12, 8, 10.0), tx, kCam);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 12; ++x) {
        CHECK(std::abs(f.flow.u(x, y) - 10.0) < 1e-9);
        CHECK(std::abs(f.flow.v(x, y)) < 1e-9);
      }
    }
  }

  TEST_CASE("identity pose gives zero flow for any depth") {
    auto g = oracle::rng(24);
    const RigidFlow f = rigid_flow(random_depth(g, 9, 7, 0.2, 80), PoseSE3::identity(), kCam);
    for (double v : f.flow.values()) CHECK(v == 0.0);
  }

  TEST_CASE("rotation-only flow does not depend on depth") {
    auto g = oracle::rng(25);
    for (int k = 0; k < 10; ++k) {
      const PoseSE3 r = PoseSE3::from_vector(
          {oracle::uniform(g, -0.1, 0.1), oracle::uniform(g, -0.1, 0.1), oracle::uniform(g, -0.1, 0.1), 0, 0, 0});
      const RigidFlow a = rigid_flow(DepthMap(16, 12, oracle::uniform(g, 0.5, 5)), r, kCam);
      const RigidFlow b = rigid_flow(random_depth(g, 16, 12, 1, 90), r, kCam);
      for (std::size_t i = 0; i < a.flow.size(); ++i) CHECK(std::abs(a.flow.values()[i] - b.flow.values()[i]) < 1e-9);
    }
  }

  TEST_CASE("rigid flow matches the pinhole oracle") {
    auto g = oracle::rng(26);
    const DepthMap d = random_depth(g, 10, 6, 2, 20);
    const auto v = PoseVector{0.05, -0.03, 0.02, 0.3, -0.2, 0.1};
    const RigidFlow f = rigid_flow(d, PoseSE3::from_vector(v), kCam);
    const oracle::Mat3 r = oracle::rotation(v[0], v[1], v[2]);
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 10; ++x) {
        const auto o = oracle::rigid_flow_pixel(x, y, d(x, y), 100, 100, 50, 50, r, {v[3], v[4], v[5]});
        CHECK(std::abs(f.flow.u(x, y) - o[0]) < 1e-10);
        CHECK(std::abs(f.flow.v(x, y) - o[1]) < 1e-10);
      }
    }
  }

  TEST_CASE("points behind the camera are invalid") {
    PoseSE3 back;
    back.translation = {0, 0, -20};
    const RigidFlow f = rigid_flow(DepthMap(4, 4, 10.0), back, kCam);
    CHECK(f.valid.count_nonzero() == 0);
  }

  TEST_CASE("forward then inverse flow cancels on a plane") {
    // Static fronto-parallel plane: the source depth is known in closed form.
    const CameraIntrinsics k{60, 60, 15.5, 11.5};
    const PoseSE3 t = PoseSE3::from_vector({0.01, -0.02, 0.015, 0.2, -0.1, 0.05});
    const int w = 32;
    const int h = 24;
    const DepthMap dt(w, h, 10.0);
    const RigidFlow fwd = rigid_flow(dt, t, k);
    // Depth of the same plane seen from the source camera, per source pixel.
    const PoseSE3 inv = pose_inverse(t);
    std::vector<double> ds(static_cast<std::size_t>(w * h));
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Ray through the source pixel, intersected with Z_t = 10 in target frame.
        const Eigen::Vector3d dir = inv.rotation_matrix() * backproject(x, y, 1.0, k);
        const Eigen::Vector3d o = inv.translation;
        ds[static_cast<std::size_t>(y * w + x)] = (10.0 - o.z()) / dir.z();
      }
    }
    const RigidFlow bwd = rigid_flow(DepthMap(w, h, std::move(ds)), inv, k);
    for (int y = 3; y < h - 3; ++y) {
      for (int x = 3; x < w - 3; ++x) {
        const double xs = x + fwd.flow.u(x, y);
        const double ys = y + fwd.flow.v(x, y);
        if (xs < 0 || ys < 0 || xs > w - 1 || ys > h - 1) continue;
        // The backward field is a smooth projective map; interpolate it exactly
        // by evaluating the oracle at the continuous source position.
        const oracle::Mat3 r = oracle::rotation(inv.rotation[0], inv.rotation[1], inv.rotation[2]);
        const Eigen::Vector3d dir = inv.rotation_matrix() * backproject(xs, ys, 1.0, k);
        const double d = (10.0 - inv.translation.z()) / dir.z();
        const auto b = oracle::rigid_flow_pixel(xs, ys, d, k.fx, k.fy, k.cx, k.cy, r,
                                                {inv.translation.x(), inv.translation.y(), inv.translation.z()});
        CHECK(std::abs(b[0] + fwd.flow.u(x, y)) < 1e-6);
        CHECK(std::abs(b[1] + fwd.flow.v(x, y)) < 1e-6);
      }
    }
    CHECK(bwd.valid.count_nonzero() > 0);
  }

  TEST_CASE("rigid flow vjp matches central differences") {
    auto g = oracle::rng(27);
    const CameraIntrinsics k{20, 22, 5.5, 3.5};
    for (int trial = 0; trial < 5; ++trial) {
      const DepthMap d = random_depth(g, 12, 8, 2, 8);
      const PoseVector pv{oracle::uniform(g, -0.1, 0.1), oracle::uniform(g, -0.1, 0.1),
                          oracle::uniform(g, -0.1, 0.1), oracle::uniform(g, -0.5, 0.5),
                          oracle::uniform(g, -0.5, 0.5), oracle::uniform(g, -0.5, 0.5)};
      const Grid w = oracle::random_grid(g, 12, 8, 2, -1, 1);
      auto f = [&](const DepthMap& dd, const PoseVector& p) {
        const RigidFlow r = rigid_flow(dd, PoseSE3::from_vector(p), k);
        double s = 0;
        for (std::size_t i = 0; i < w.size(); ++i) s += w.values()[i] * r.flow.values()[i];
        return s;
      };
      const RigidFlowGradient grad = rigid_flow_vjp(d, PoseSE3::from_vector(pv), k, w);
      const double h = 1e-6;
      for (int j = 0; j < 6; ++j) {
        PoseVector a = pv;
        PoseVector b = pv;
        a[j] += h;
        b[j] -= h;
        CHECK(oracle::rel_error(grad.d_pose[j], (f(d, a) - f(d, b)) / (2 * h), 1e-6) < 1e-4);
      }
      for (int i = 0; i < 96; i += 7) {
        DepthMap a = d;
        DepthMap b = d;
        a.values()[i] += h;
        b.values()[i] -= h;
        CHECK(oracle::rel_error(grad.d_depth.values()[i], (f(a, pv) - f(b, pv)) / (2 * h), 1e-6) < 1e-4);
      }
    }
  }
}
