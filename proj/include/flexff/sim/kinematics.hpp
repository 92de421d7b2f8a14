// Copyright 2026 The flexff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "flexff/sim/trajectory.hpp"

namespace flexff {

struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

// Revolute joint described by its axis direction and a point on the axis,
// both in the base frame with every joint at zero.
struct JointAxis {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

// Standard Denavit–Hartenberg row, used only to derive axis/point pairs.
struct DhRow {
  double d = 0.0;
  double a = 0.0;
  double alpha = 0.0;
  double theta_offset = 0.0;
};

// Serial revolute chain in product-of-exponentials form.
struct KinematicChain {
  std::vector<JointAxis> joints;
  Eigen::Vector3d home_position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond home_orientation = Eigen::Quaterniond::Identity();

  std::size_t n_joints() const { return joints.size(); }

  static KinematicChain from_dh(const std::vector<DhRow>& rows);
  // 7-DOF chain with Baxter-like link offsets (invented defaults).
  static KinematicChain baxter_like();
  // Planar chain in the x-y plane with the given link lengths, axes along z.
  static KinematicChain planar(const std::vector<double>& link_lengths);
};

// Rows of the 6×n Jacobian used for the manipulability measure.
enum class JacobianRows { kFull, kPosition, kPlanarXY };

Pose forward_kinematics(const KinematicChain& chain, const JointVector& q);

// Geometric Jacobian in the base frame, rows ordered [ω; v] (angular first)
// where v is the velocity of the end-effector point.
Eigen::MatrixXd jacobian(const KinematicChain& chain, const JointVector& q);

// sqrt(det(J Jᵀ)) over the selected rows.
double manipulability(const KinematicChain& chain, const JointVector& q,
                      JacobianRows rows = JacobianRows::kFull);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& jac, JacobianRows rows);

// Rotation vector taking `from` onto `to` (base frame), i.e. log(to · from⁻¹).
Eigen::Vector3d orientation_error(const Eigen::Quaterniond& to, const Eigen::Quaterniond& from);

struct IkOptions {
  int max_iters = 200;
  // Converged when both the position (m) and the rotation-vector (rad) errors
  // are below this.
  double tolerance = 1e-10;
  double damping = 1e-4;
};

// Damped least-squares solve for a joint vector reaching `target`, started at
// `seed`. Throws Error("unreachable") when it does not converge.
JointVector inverse_kinematics(const KinematicChain& chain, const Pose& target, const JointVector& seed,
                               const IkOptions& options = {});

}  // namespace flexff
