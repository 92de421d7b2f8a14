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

#include <deque>
#include <string>

#include <Eigen/Core>

#include "flexff/sim/kinematics.hpp"
#include "flexff/sim/trajectory.hpp"

namespace flexff {

// Simulated flexible-joint arm: per joint a motor inertia driven by a PD
// servo toward the (delayed) commanded setpoint, connected to a link inertia
// through a spring/damper. Link accelerations are mixed by a symmetric
// coupling matrix and perturbed by a gravity-like sin(q) torque.
struct PlantConfig {
  std::string name = "default";
  int n_joints = 7;
  double dt = 0.01;
  // Semi-implicit Euler substeps per sample; the servo damping at the default
  // gains is too stiff for a single 10 ms step.
  int substeps = 20;
  Eigen::VectorXd motor_inertia;
  Eigen::VectorXd link_inertia;
  Eigen::VectorXd spring_stiffness;
  Eigen::VectorXd spring_damping;
  Eigen::VectorXd servo_kp;
  Eigen::VectorXd servo_kd;
  Eigen::MatrixXd coupling;
  Eigen::VectorXd gravity_gain;
  int delay_steps = 2;
  Eigen::VectorXd joint_limits_lo;
  Eigen::VectorXd joint_limits_hi;
  double divergence_bound = 1e3;
  KinematicChain kinematic_params;

  static PlantConfig defaults();
  // Uniform single-value parameters for an n-joint plant; coupling = I and the
  // kinematic chain planar with unit links. Handy for tests.
  static PlantConfig uniform(int n_joints);
};

void validate(const PlantConfig& config);

struct PlantState {
  Eigen::VectorXd motor_pos;
  Eigen::VectorXd motor_vel;
  Eigen::VectorXd link_pos;
  Eigen::VectorXd link_vel;
  // Commands waiting to reach the servo; length == delay_steps.
  std::deque<Eigen::VectorXd> delay_buffer;
  // Setpoint currently held by the servo (zero-order hold). A command sent at
  // sample t is latched at the end of the step, so the output at t depends on
  // commands up to t - 1 - delay_steps.
  Eigen::VectorXd held_command;
};

PlantState plant_init(const PlantConfig& config, const JointVector& q0);

// Advances the plant by one sample under command q_c and returns the new link
// positions.
JointVector plant_step(const PlantConfig& config, PlantState& state, const JointVector& q_c);

// Folds plant_step over every column of q_c starting from plant_init at the
// first column.
Trajectory simulate(const PlantConfig& config, const Trajectory& q_c);

}  // namespace flexff
