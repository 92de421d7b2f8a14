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

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "flexff/sim/plant.hpp"

namespace flexff::harness {

// One lap around a square in the x-y plane at fixed height and fixed
// end-effector orientation, starting and ending at the (−x, −y) corner.
struct SquareSpec {
  double side_m = 0.3;
  double z_m = 0.2;
  double period_s = 4.0;
  double rate = 100.0;
  Eigen::Vector2d center = Eigen::Vector2d(0.55, 0.0);
  // IK seed; its orientation is the one held along the path. Empty selects a
  // forward-reaching pose for the default chain.
  Eigen::VectorXd seed;
  double max_joint_velocity = 2.0;  // rad/s
};

struct SquareReference {
  Trajectory q_d;
  Eigen::MatrixXd xyz_ref;  // 3 × N
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  double max_position_deviation = 0.0;     // m, FK(q_d) vs xyz_ref
  double max_orientation_deviation = 0.0;  // rad
};

// Piecewise-linear corner path sampled at `rate`, N = round(period·rate) + 1.
Eigen::MatrixXd square_path(const SquareSpec& spec);

// Joint-space reference: IK to the first corner, then the resolved-velocity QP
// with the orientation lock integrated at 1/rate. Throws Error("unreachable")
// when IK fails or FK(q_d) leaves the path by 1 mm or rotates by 1e-3 rad.
SquareReference cartesian_square_reference(const PlantConfig& plant, const SquareSpec& spec);

// End-effector positions (3 × N) of a joint trajectory.
Eigen::MatrixXd cartesian_positions(const KinematicChain& chain, const Trajectory& q);

}  // namespace flexff::harness
