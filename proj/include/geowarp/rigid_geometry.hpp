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
 * @file rigid_geometry.hpp
 * @brief Pinhole camera, Euler-angle SE(3) poses and rigid flow synthesis.
 *
 * Rotation convention (fixed, used everywhere including the pose files):
 *   R = Rz(rz) * Ry(ry) * Rx(rx)
 * i.e. rotate about the camera x axis first, then y, then z.
 *
 * A pose T_{t->s} maps points expressed in the target camera frame into the
 * source camera frame: X_s = R X_t + t.
 */

#pragma once

#include <array>

#include <Eigen/Core>

#include "geowarp/core_types.hpp"

namespace geowarp {

/// Smallest camera-frame z treated as in front of the camera.
inline constexpr double kMinProjectionDepth = 1e-3;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws DomainError unless fx, fy > 0 and all entries are finite.
  void validate() const;
  /// Intrinsics of pyramid level `level` under 2x2 average pooling.
  CameraIntrinsics at_level(int level) const;
};

using Point3D = Eigen::Vector3d;
using Matrix34 = Eigen::Matrix<double, 3, 4>;

/// Pose parameter vector layout used by every gradient: rx, ry, rz, tx, ty, tz.
using PoseVector = std::array<double, 6>;

struct PoseSE3 {
  std::array<double, 3> rotation{0.0, 0.0, 0.0};  // radians, (rx, ry, rz)
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static PoseSE3 identity() { return {}; }
  static PoseSE3 from_vector(const PoseVector& v);
  PoseVector to_vector() const;

  Eigen::Matrix3d rotation_matrix() const;
  Matrix34 matrix() const;
  static PoseSE3 from_matrix(const Matrix34& m);

  Point3D apply(const Point3D& p) const;

  bool operator==(const PoseSE3& o) const { return rotation == o.rotation && translation == o.translation; }
};

Eigen::Matrix3d euler_to_rotation(const std::array<double, 3>& angles);

/// Inverse of euler_to_rotation on rotation matrices; picks rx = 0 at gimbal lock.
std::array<double, 3> rotation_to_euler(const Eigen::Matrix3d& r);

/// d R / d angle_k for k = 0 (rx), 1 (ry), 2 (rz).
std::array<Eigen::Matrix3d, 3> euler_rotation_derivatives(const std::array<double, 3>& angles);

/// a o b: first apply b, then a.
PoseSE3 compose(const PoseSE3& a, const PoseSE3& b);
PoseSE3 pose_inverse(const PoseSE3& pose);

/// Geodesic angle of R_a^T R_b in radians.
double rotation_distance(const PoseSE3& a, const PoseSE3& b);

Point3D backproject(double x, double y, double depth, const CameraIntrinsics& k);

struct Projection {
  double x = 0.0;
  double y = 0.0;
  bool in_front = true;
};

/// Points with z <= kMinProjectionDepth are projected with z clamped to that
/// value and reported as not in front.
Projection project(const Point3D& p, const CameraIntrinsics& k);

struct RigidFlow {
  FlowField flow;
  Mask valid;  // 1 where the transformed point is in front and the flow finite
};

/// Per pixel p: project(R * backproject(p, D(p)) + t) - p.
RigidFlow rigid_flow(const DepthMap& depth, const PoseSE3& pose, const CameraIntrinsics& k);

struct RigidFlowGradient {
  Grid d_depth;        // one channel, same extent as the depth map
  PoseVector d_pose{};  // rx, ry, rz, tx, ty, tz
};

/// Vector-Jacobian product of rigid_flow for a two-channel cotangent.
RigidFlowGradient rigid_flow_vjp(const DepthMap& depth, const PoseSE3& pose,
                                 const CameraIntrinsics& k, const Grid& upstream);

}  // namespace geowarp
