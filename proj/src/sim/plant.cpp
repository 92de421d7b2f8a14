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

#include "flexff/sim/plant.hpp"

#include <cmath>
#include <string>

namespace flexff {
namespace {

Eigen::VectorXd filled(int n, double v) { return Eigen::VectorXd::Constant(n, v); }

}  // namespace

PlantConfig PlantConfig::defaults() {
  PlantConfig c;
  const int n = 7;
  c.n_joints = n;
  c.motor_inertia = filled(n, 0.01);
  c.link_inertia = filled(n, 0.1);
  c.spring_stiffness = filled(n, 50.0);
  c.spring_damping = filled(n, 1.0);
  c.servo_kp = filled(n, 100.0);
  c.servo_kd = filled(n, 10.0);
  c.coupling = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) c.coupling(i, i + 1) = c.coupling(i + 1, i) = 0.05;
  c.gravity_gain = filled(n, 0.5);
  c.delay_steps = 2;
  c.joint_limits_hi.resize(n);
  c.joint_limits_hi << 1.7, 2.1, 3.0, 2.6, 3.0, 2.0, 3.0;
  c.joint_limits_lo = -c.joint_limits_hi;
  c.kinematic_params = KinematicChain::baxter_like();
  return c;
}

PlantConfig PlantConfig::uniform(int n) {
  PlantConfig c = defaults();
  c.name = "uniform";
  c.n_joints = n;
  c.motor_inertia = filled(n, 0.01);
  c.link_inertia = filled(n, 0.1);
  c.spring_stiffness = filled(n, 50.0);
  c.spring_damping = filled(n, 1.0);
  c.servo_kp = filled(n, 100.0);
  c.servo_kd = filled(n, 10.0);
  c.coupling = Eigen::MatrixXd::Identity(n, n);
  c.gravity_gain = filled(n, 0.0);
  c.joint_limits_lo = filled(n, -3.0);
  c.joint_limits_hi = filled(n, 3.0);
  c.kinematic_params = KinematicChain::planar(std::vector<double>(n, 1.0));
  return c;
}

void validate(const PlantConfig& c) {
  const auto n = static_cast<Eigen::Index>(c.n_joints);
  require(c.n_joints >= 1, "invalid_config", "n_joints must be >= 1");
  require(c.dt > 0.0, "invalid_config", "dt must be positive");
  require(c.substeps >= 1, "invalid_config", "substeps must be >= 1");
  require(c.delay_steps >= 0, "invalid_config", "delay_steps must be >= 0");
  const auto check_vec = [&](const Eigen::VectorXd& v, const char* key) {
    require(v.size() == n, "invalid_config", std::string(key) + " must have n_joints entries");
    require(v.allFinite(), "invalid_config", std::string(key) + " must be finite");
  };
  check_vec(c.motor_inertia, "motor_inertia");
  check_vec(c.link_inertia, "link_inertia");
  check_vec(c.spring_stiffness, "spring_stiffness");
  check_vec(c.spring_damping, "spring_damping");
  check_vec(c.servo_kp, "servo_kp");
  check_vec(c.servo_kd, "servo_kd");
  check_vec(c.gravity_gain, "gravity_gain");
  check_vec(c.joint_limits_lo, "joint_limits");
  check_vec(c.joint_limits_hi, "joint_limits");
  require((c.motor_inertia.array() > 0.0).all() && (c.link_inertia.array() > 0.0).all(),
          "invalid_config", "inertias must be positive");
  require((c.spring_stiffness.array() > 0.0).all(), "invalid_config",
          "spring_stiffness must be positive");
  require((c.joint_limits_lo.array() < c.joint_limits_hi.array()).all(), "invalid_config",
          "joint_limits require lo < hi");
  require(c.coupling.rows() == n && c.coupling.cols() == n, "invalid_config",
          "coupling must be n_joints x n_joints");
  require(c.coupling.allFinite() && c.coupling == c.coupling.transpose(), "invalid_config",
          "coupling must be symmetric");
  require((c.coupling.diagonal().array() == 1.0).all(), "invalid_config",
          "coupling must have unit diagonal");
  require(c.kinematic_params.n_joints() == static_cast<std::size_t>(c.n_joints), "invalid_config",
          "kinematic_params joint count must equal n_joints");
}

PlantState plant_init(const PlantConfig& config, const JointVector& q0) {
  validate(config);
  require(q0.size() == config.n_joints, "shape_mismatch", "q0 size must equal n_joints");
  require(q0.allFinite(), "non_finite", "q0 contains non-finite values");
  for (int i = 0; i < config.n_joints; ++i) {
    if (q0[i] < config.joint_limits_lo[i] || q0[i] > config.joint_limits_hi[i]) {
      throw Error("limit_violation", "q0 outside joint limits on joint " + std::to_string(i + 1));
    }
  }
  PlantState s;
  s.motor_pos = q0;
  s.link_pos = q0;
  s.motor_vel = Eigen::VectorXd::Zero(config.n_joints);
  s.link_vel = Eigen::VectorXd::Zero(config.n_joints);
  s.delay_buffer.assign(static_cast<std::size_t>(config.delay_steps), q0);
  s.held_command = q0;
  return s;
}

JointVector plant_step(const PlantConfig& c, PlantState& s, const JointVector& q_c) {
  require(q_c.size() == c.n_joints, "shape_mismatch", "command size must equal n_joints");
  require(q_c.allFinite(), "non_finite", "command contains non-finite values");

  const double h = c.dt / c.substeps;
  const Eigen::VectorXd& u = s.held_command;
  Eigen::VectorXd link_acc(c.n_joints);
  for (int k = 0; k < c.substeps; ++k) {
    const Eigen::ArrayXd stretch = (s.motor_pos - s.link_pos).array();
    const Eigen::ArrayXd stretch_rate = (s.motor_vel - s.link_vel).array();
    const Eigen::ArrayXd elastic =
        c.spring_stiffness.array() * stretch + c.spring_damping.array() * stretch_rate;
    const Eigen::ArrayXd servo =
        c.servo_kp.array() * (u - s.motor_pos).array() - c.servo_kd.array() * s.motor_vel.array();
    const Eigen::ArrayXd motor_acc = (servo - elastic) / c.motor_inertia.array();
    const Eigen::ArrayXd raw_link_acc =
        (elastic - c.gravity_gain.array() * s.link_pos.array().sin()) / c.link_inertia.array();
    link_acc.noalias() = c.coupling * raw_link_acc.matrix();

    s.motor_vel.array() += h * motor_acc;
    s.link_vel += h * link_acc;
    s.motor_pos += h * s.motor_vel;
    s.link_pos += h * s.link_vel;
  }

  if (c.delay_steps > 0) {
    s.held_command = std::move(s.delay_buffer.front());
    s.delay_buffer.pop_front();
    s.delay_buffer.push_back(q_c);
  } else {
    s.held_command = q_c;
  }

  if (!s.link_pos.allFinite() || s.link_pos.cwiseAbs().maxCoeff() > c.divergence_bound) {
    throw Error("divergence", "plant '" + c.name + "' diverged (|q| > " +
                                  std::to_string(c.divergence_bound) + " rad)");
  }
  return s.link_pos;
}

Trajectory simulate(const PlantConfig& config, const Trajectory& q_c) {
  validate(q_c);
  require(q_c.n_joints() == config.n_joints, "shape_mismatch",
          "trajectory joint count must equal n_joints");
  require(std::abs(q_c.sample_rate * config.dt - 1.0) < 1e-9, "rate_mismatch",
          "trajectory sample_rate must equal 1/dt");
  PlantState state = plant_init(config, q_c.sample(0));
  Trajectory out(q_c.n_joints(), q_c.length(), q_c.sample_rate);
  for (Eigen::Index t = 0; t < q_c.length(); ++t) out.sample(t) = plant_step(config, state, q_c.sample(t));
  return out;
}

}  // namespace flexff
