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

#include "geowarp/rigid_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "geowarp/errors.hpp"

namespace geowarp {

namespace {

Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// Derivatives of the elementary rotations.
Eigen::Matrix3d drot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return r;
}

Eigen::Matrix3d drot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return r;
}

Eigen::Matrix3d drot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return r;
}

void check_depth(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw DomainError("depth must be strictly positive, got " + std::to_string(d));
  }
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw DomainError("intrinsics require finite fx > 0 and fy > 0");
  }
}

CameraIntrinsics CameraIntrinsics::at_level(int level) const {
  CameraIntrinsics k = *this;
  for (int l = 0; l < level; ++l) {
    k.fx *= 0.5;
    k.fy *= 0.5;
    k.cx = coarse_from_fine(k.cx);
    k.cy = coarse_from_fine(k.cy);
  }
  return k;
}

PoseSE3 PoseSE3::from_vector(const PoseVector& v) {
  PoseSE3 p;
  p.rotation = {v[0], v[1], v[2]};
  p.translation = Eigen::Vector3d(v[3], v[4], v[5]);
  return p;
}

PoseVector PoseSE3::to_vector() const {
  return {rotation[0], rotation[1], rotation[2], translation.x(), translation.y(),
          translation.z()};
}

Eigen::Matrix3d PoseSE3::rotation_matrix() const { return euler_to_rotation(rotation); }

Matrix34 PoseSE3::matrix() const {
  Matrix34 m;
  m.leftCols<3>() = rotation_matrix();
  m.col(3) = translation;
  return m;
}

PoseSE3 PoseSE3::from_matrix(const Matrix34& m) {
  PoseSE3 p;
  p.rotation = rotation_to_euler(m.leftCols<3>());
  p.translation = m.col(3);
  return p;
}

Point3D PoseSE3::apply(const Point3D& p) const { return rotation_matrix() * p + translation; }

Eigen::Matrix3d euler_to_rotation(const std::array<double, 3>& a) {
  return rot_z(a[2]) * rot_y(a[1]) * rot_x(a[0]);
}

std::array<double, 3> rotation_to_euler(const Eigen::Matrix3d& r) {
  const double cy = std::hypot(r(0, 0), r(1, 0));
  const double ry = std::atan2(-r(2, 0), cy);
  if (cy < 1e-12) {
    // Gimbal lock: only rz - rx (or rz + rx) is observable.
    return {0.0, ry, std::atan2(-r(0, 1), r(1, 1))};
  }
  return {std::atan2(r(2, 1), r(2, 2)), ry, std::atan2(r(1, 0), r(0, 0))};
}

std::array<Eigen::Matrix3d, 3> euler_rotation_derivatives(const std::array<double, 3>& a) {
  const Eigen::Matrix3d rx = rot_x(a[0]), ry = rot_y(a[1]), rz = rot_z(a[2]);
  return {rz * ry * drot_x(a[0]), rz * drot_y(a[1]) * rx, drot_z(a[2]) * ry * rx};
}

PoseSE3 compose(const PoseSE3& a, const PoseSE3& b) {
  const Eigen::Matrix3d ra = a.rotation_matrix();
  PoseSE3 out;
  out.rotation = rotation_to_euler(ra * b.rotation_matrix());
  out.translation = ra * b.translation + a.translation;
  return out;
}

PoseSE3 pose_inverse(const PoseSE3& pose) {
  const Eigen::Matrix3d rt = pose.rotation_matrix().transpose();
  PoseSE3 out;
  out.rotation = rotation_to_euler(rt);
  out.translation = -rt * pose.translation;
  return out;
}

double rotation_distance(const PoseSE3& a, const PoseSE3& b) {
  const Eigen::Matrix3d d = a.rotation_matrix().transpose() * b.rotation_matrix();
  const double c = std::clamp((d.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

Point3D backproject(double x, double y, double depth, const CameraIntrinsics& k) {
  check_depth(depth);
  return {(x - k.cx) * depth / k.fx, (y - k.cy) * depth / k.fy, depth};
}

Projection project(const Point3D& p, const CameraIntrinsics& k) {
  Projection out;
  out.in_front = p.z() > kMinProjectionDepth;
  const double z = out.in_front ? p.z() : kMinProjectionDepth;
  out.x = k.fx * p.x() / z + k.cx;
  out.y = k.fy * p.y() / z + k.cy;
  return out;
}

RigidFlow rigid_flow(const DepthMap& depth, const PoseSE3& pose, const CameraIntrinsics& k) {
  k.validate();
  const Eigen::Matrix3d r = pose.rotation_matrix();
  RigidFlow out{FlowField(depth.width(), depth.height()), Mask(depth.width(), depth.height(), 0.0)};
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth(x, y);
      check_depth(d);
      // project(q) - p written against the pixel's own ray, so an identity
      // pose gives exactly zero flow.
      const Point3D ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Point3D q = r * (d * ray) + pose.translation;
      const bool in_front = q.z() > kMinProjectionDepth;
      const double z = in_front ? q.z() : kMinProjectionDepth;
      const double u = k.fx * (q.x() - ray.x() * z) / z;
      const double v = k.fy * (q.y() - ray.y() * z) / z;
      const bool finite = std::isfinite(u) && std::isfinite(v);
      out.flow.u(x, y) = finite ? u : 0.0;
      out.flow.v(x, y) = finite ? v : 0.0;
      out.valid(x, y) = (in_front && finite) ? 1.0 : 0.0;
    }
  }
  return out;
}

RigidFlowGradient rigid_flow_vjp(const DepthMap& depth, const PoseSE3& pose,
                                 const CameraIntrinsics& k, const Grid& upstream) {
  if (!upstream.same_extent(depth) || upstream.channels() != 2) {
    throw DimensionError("rigid_flow_vjp: upstream must be a two-channel grid matching depth");
  }
  k.validate();
  const Eigen::Matrix3d r = pose.rotation_matrix();
  const auto dr = euler_rotation_derivatives(pose.rotation);

  RigidFlowGradient g;
  g.d_depth = Grid(depth.width(), depth.height(), 1);
  Eigen::Matrix<double, 6, 1> d_pose = Eigen::Matrix<double, 6, 1>::Zero();

  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double gu = upstream(x, y, 0);
      const double gv = upstream(x, y, 1);
      if (gu == 0.0 && gv == 0.0) continue;
      const double d = depth(x, y);
      const Point3D ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Point3D p = d * ray;
      const Point3D q = r * p + pose.translation;

      // Cotangent with respect to the transformed point q.
      Eigen::Vector3d gq;
      if (q.z() > kMinProjectionDepth) {
        const double iz = 1.0 / q.z();
        gq.x() = gu * k.fx * iz;
        gq.y() = gv * k.fy * iz;
        gq.z() = -(gu * k.fx * q.x() + gv * k.fy * q.y()) * iz * iz;
      } else {
        const double iz = 1.0 / kMinProjectionDepth;
        gq = Eigen::Vector3d(gu * k.fx * iz, gv * k.fy * iz, 0.0);
      }

      g.d_depth(x, y) = gq.dot(r * ray);
      for (int a = 0; a < 3; ++a) d_pose(a) += gq.dot(dr[a] * p);
      d_pose.tail<3>() += gq;
    }
  }
  for (int i = 0; i < 6; ++i) g.d_pose[i] = d_pose(i);
  return g;
}

}  // namespace geowarp
