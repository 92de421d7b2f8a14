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

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string_view>

#include "flexff/control/feedback.hpp"
#include "flexff/sim/plant.hpp"
#include "flexff/teleop/protocol.hpp"

namespace flexff::teleop {

struct SessionConfig {
  PlantConfig plant = PlantConfig::defaults();
  // Empty selects default_start_pose(n_joints).
  JointVector q_start;
  control::ControllerConfig controller;
  double rate_hz = 100.0;
  int window_T = 50;
  // A held velocity command ramps linearly to zero over this many seconds
  // after it was received.
  double stale_after_s = 0.5;
  double max_joint_velocity = 1.0;  // rad/s
  bool comp_on = true;
  bool orientation_lock = false;
  // Ticks summed into err_l2_window.
  int error_window = 100;
};

void validate(const SessionConfig& config);

// Forward-reaching pose for the default 7-joint arm; zeros otherwise.
JointVector default_start_pose(int n_joints);

struct TickResult {
  StateMsg state;
  std::optional<ErrorMsg> error;
};

// One simulated arm driven by streamed spatial-velocity commands. Messages
// are only queued by handle_message; their effects start at the next tick.
// Each tick solves the resolved-velocity QP, integrates q̇·dt into the
// setpoint stream, feeds the stream to the bidirectional compensator and
// applies the control law to the plant. The control reference is the
// setpoint stream delayed by the compensator latency (T/2 − 1 samples) in
// both modes, so toggling compensation never jumps the reference.
class Session {
 public:
  // `inverse` may be null; compensation then stays off and latency is 0.
  Session(SessionConfig config, std::shared_ptr<const nn::RecurrentModel> inverse);

  SessionInfo info() const;
  const SessionConfig& config() const { return config_; }

  // Returns the error reply for malformed or rejected messages; the session
  // state is unchanged in that case.
  std::optional<ErrorMsg> handle_message(std::string_view text);
  std::optional<ErrorMsg> handle(const ClientMessage& msg);

  TickResult tick();

  std::uint64_t ticks() const { return tick_; }
  int latency_samples() const { return latency_; }
  bool comp_on() const { return comp_on_; }
  bool orientation_lock() const { return lock_on_; }
  // Integrated setpoint after the last tick (before the delay).
  const JointVector& setpoint() const { return q_int_; }
  // Velocity command in effect at the next tick, after staleness decay.
  Eigen::Matrix<double, 6, 1> effective_command() const;

 private:
  SessionConfig config_;
  std::shared_ptr<const nn::RecurrentModel> model_;
  std::optional<control::StreamState> stream_;
  int latency_ = 0;
  double dt_ = 0.01;
  Eigen::VectorXd k_;

  PlantState plant_;
  JointVector q_int_;
  JointVector q_meas_;
  JointVector ref_prev_;
  std::deque<JointVector> history_;  // last latency + 1 setpoints

  Eigen::Matrix<double, 6, 1> v_last_ = Eigen::Matrix<double, 6, 1>::Zero();
  bool has_cmd_ = false;
  std::optional<std::uint64_t> last_seq_;
  std::uint64_t age_ = 0;  // ticks since v_last_ took effect

  std::optional<VelCmd> pending_cmd_;
  std::optional<bool> pending_comp_;
  std::optional<bool> pending_lock_;
  bool comp_on_ = false;
  bool lock_on_ = false;

  std::deque<double> err_window_;
  std::uint64_t tick_ = 0;
};

}  // namespace flexff::teleop
