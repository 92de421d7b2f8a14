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

#include "flexff/harness/cartesian.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "flexff/common/error.hpp"
#include "flexff/control/qp.hpp"

namespace flexff::harness {

Eigen::MatrixXd square_path(const SquareSpec& spec) {
  require(spec.side_m >= 0.0 && spec.period_s > 0.0 && spec.rate > 0.0, "invalid_config",
          "square needs side >= 0, period > 0 and rate > 0");
  const auto n = static_cast<Eigen::Index>(std::lround(spec.period_s * spec.rate)) + 1;
  const double h = spec.side_m / 2.0;
  Eigen::Matrix<double, 2, 5> corners;
  corners << -h, h, h, -h, -h,  //
      -h, -h, h, h, -h;
  Eigen::MatrixXd path(3, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double u = n == 1 ? 0.0 : 4.0 * static_cast<double>(t) / static_cast<double>(n - 1);
    const int seg = std::min(3, static_cast<int>(u));
    const double f = u - seg;
    const Eigen::Vector2d xy = corners.col(seg) + f * (corners.col(seg + 1) - corners.col(seg));
    path.col(t) << spec.center + xy, spec.z_m;
  }
  return path;
}

SquareReference cartesian_square_reference(const PlantConfig& plant, const SquareSpec& spec) {
  const KinematicChain& chain = plant.kinematic_params;
  const auto nj = static_cast<Eigen::Index>(chain.n_joints());
  require(nj == plant.n_joints, "invalid_config", "kinematic chain does not match the plant");
  Eigen::VectorXd seed = spec.seed;
  if (seed.size() == 0) {
    seed = Eigen::VectorXd::Zero(nj);
    if (nj == 7) seed << 0.0, -0.55, 0.0, 0.75, 0.0, 1.26, 0.0;
  }
  require(seed.size() == nj, "invalid_config", "square seed must have n_joints entries");

  SquareReference ref;
  ref.xyz_ref = square_path(spec);
  ref.orientation = forward_kinematics(chain, seed).orientation;
  const Eigen::Index n = ref.xyz_ref.cols();
  const double dt = 1.0 / spec.rate;

  Pose start;
  start.position = ref.xyz_ref.col(0);
  start.orientation = ref.orientation;
  JointVector q = inverse_kinematics(chain, start, seed);
  require(((q.array() >= plant.joint_limits_lo.array()) && (q.array() <= plant.joint_limits_hi.array())).all(),
          "unreachable", "first square corner needs a joint outside its limits");

  ref.q_d = Trajectory(nj, n, spec.rate);
  ref.q_d.sample(0) = q;
  control::QpProblem qp;
  qp.lock_orientation = true;
  const Eigen::VectorXd vel = Eigen::VectorXd::Constant(nj, spec.max_joint_velocity);
  for (Eigen::Index t = 0; t + 1 < n; ++t) {
    // Deadbeat velocity toward the next path sample; corrects the first-order
    // integration drift of the previous step.
    const Pose pose = forward_kinematics(chain, q);
    qp.J = jacobian(chain, q);
    qp.v_d << orientation_error(ref.orientation, pose.orientation) / dt,
        (ref.xyz_ref.col(t + 1) - pose.position) / dt;
    control::joint_limit_box(q, plant.joint_limits_lo, plant.joint_limits_hi, vel, dt, qp.qdot_lo, qp.qdot_hi);
    try {
      q += control::resolved_velocity_solve(qp).qdot * dt;
    } catch (const Error& e) {
      throw Error("unreachable", "square sample " + std::to_string(t) + ": " + e.detail());
    }
    ref.q_d.sample(t + 1) = q;
  }

  for (Eigen::Index t = 0; t < n; ++t) {
    const Pose pose = forward_kinematics(chain, ref.q_d.sample(t));
    ref.max_position_deviation = std::max(ref.max_position_deviation, (pose.position - ref.xyz_ref.col(t)).norm());
    ref.max_orientation_deviation =
        std::max(ref.max_orientation_deviation, orientation_error(ref.orientation, pose.orientation).norm());
  }
  require(ref.max_position_deviation < 1e-3 && ref.max_orientation_deviation < 1e-3, "unreachable",
          "square reference deviates from the path by " + std::to_string(ref.max_position_deviation) + " m / " +
              std::to_string(ref.max_orientation_deviation) + " rad");
  return ref;
}

Eigen::MatrixXd cartesian_positions(const KinematicChain& chain, const Trajectory& q) {
  Eigen::MatrixXd out(3, q.length());
  for (Eigen::Index t = 0; t < q.length(); ++t) out.col(t) = forward_kinematics(chain, q.sample(t)).position;
  return out;
}

}  // namespace flexff::harness
