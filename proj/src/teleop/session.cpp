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

#include "flexff/teleop/session.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "flexff/common/error.hpp"
#include "flexff/control/qp.hpp"
#include "flexff/sim/config_io.hpp"

namespace flexff::teleop {

void validate(const SessionConfig& c) {
  validate(c.plant);
  require(c.rate_hz > 0.0, "invalid_config", "rate_hz must be positive");
  require(c.window_T >= 2 && c.window_T % 2 == 0, "invalid_config", "window_T must be even and >= 2");
  require(c.stale_after_s > 0.0, "invalid_config", "stale_after_s must be positive");
  require(c.max_joint_velocity > 0.0, "invalid_config", "max_joint_velocity must be positive");
  require(c.error_window >= 1, "invalid_config", "error_window must be >= 1");
  require(c.q_start.size() == 0 || c.q_start.size() == c.plant.n_joints, "invalid_config",
          "q_start must have n_joints entries");
  require(c.plant.kinematic_params.n_joints() == static_cast<std::size_t>(c.plant.n_joints), "invalid_config",
          "kinematic chain does not match the plant");
}

JointVector default_start_pose(int n) {
  JointVector q = JointVector::Zero(n);
  if (n == 7) q << 0.0, -0.55, 0.0, 0.75, 0.0, 1.26, 0.0;
  return q;
}

Session::Session(SessionConfig config, std::shared_ptr<const nn::RecurrentModel> inverse)
    : config_(std::move(config)), model_(std::move(inverse)) {
  validate(config_);
  const int n = config_.plant.n_joints;
  if (config_.q_start.size() == 0) config_.q_start = default_start_pose(n);
  dt_ = 1.0 / config_.rate_hz;
  k_ = config_.controller.gains(n);
  if (model_) {
    const nn::Topology& topo = model_->topology();
    require(topo.direction == nn::Direction::kBidirectional, "invalid_model",
            "teleop compensation needs a bidirectional model");
    require(topo.n_joints == n, "invalid_model", "model joint count does not match the plant");
    require(topo.window == config_.window_T, "invalid_model",
            "model window " + std::to_string(topo.window) + " does not match window_T " +
                std::to_string(config_.window_T));
    stream_.emplace(*model_);
    latency_ = config_.window_T / 2 - 1;
  }
  comp_on_ = config_.comp_on && model_ != nullptr;
  lock_on_ = config_.orientation_lock;
  plant_ = plant_init(config_.plant, config_.q_start);
  q_int_ = config_.q_start;
  q_meas_ = config_.q_start;
  ref_prev_ = config_.q_start;
  history_.assign(static_cast<std::size_t>(latency_) + 1, config_.q_start);
}

SessionInfo Session::info() const {
  return {config_.plant.n_joints, config_.rate_hz, config_.window_T, to_json(config_.plant.kinematic_params)};
}

std::optional<ErrorMsg> Session::handle_message(std::string_view text) {
  try {
    return handle(parse_client_message(text));
  } catch (const Error& e) {
    return ErrorMsg{e.code(), e.detail()};
  }
}

std::optional<ErrorMsg> Session::handle(const ClientMessage& msg) {
  if (const auto* cmd = std::get_if<VelCmd>(&msg)) {
    if (last_seq_ && cmd->seq <= *last_seq_) {
      return ErrorMsg{"out_of_order", "seq " + std::to_string(cmd->seq) + " is not greater than " +
                                          std::to_string(*last_seq_)};
    }
    last_seq_ = cmd->seq;
    pending_cmd_ = *cmd;
  } else if (const auto* comp = std::get_if<ToggleComp>(&msg)) {
    if (comp->on && !model_) return ErrorMsg{"unavailable", "no compensator model loaded"};
    pending_comp_ = comp->on;
  } else {
    pending_lock_ = std::get<SetOrientationLock>(msg).on;
  }
  return std::nullopt;
}

Eigen::Matrix<double, 6, 1> Session::effective_command() const {
  if (!has_cmd_) return Eigen::Matrix<double, 6, 1>::Zero();
  const double scale = std::max(0.0, 1.0 - static_cast<double>(age_) * dt_ / config_.stale_after_s);
  return v_last_ * scale;
}

TickResult Session::tick() {
  TickResult out;
  if (pending_cmd_) {
    v_last_ = Eigen::Map<const Eigen::Matrix<double, 6, 1>>(pending_cmd_->v.data());
    has_cmd_ = true;
    age_ = 0;
    pending_cmd_.reset();
  }
  if (pending_comp_) comp_on_ = *std::exchange(pending_comp_, std::nullopt);
  if (pending_lock_) lock_on_ = *std::exchange(pending_lock_, std::nullopt);

  const PlantConfig& plant = config_.plant;
  Eigen::Matrix<double, 6, 1> v_d = effective_command();
  if (lock_on_) v_d.head<3>().setZero();
  if (!v_d.isZero(0.0)) {
    control::QpProblem qp;
    qp.J = jacobian(plant.kinematic_params, q_int_);
    qp.v_d = v_d;
    qp.lock_orientation = lock_on_;
    control::joint_limit_box(q_int_, plant.joint_limits_lo, plant.joint_limits_hi,
                             Eigen::VectorXd::Constant(plant.n_joints, config_.max_joint_velocity), dt_, qp.qdot_lo,
                             qp.qdot_hi);
    try {
      q_int_ += control::resolved_velocity_solve(qp).qdot * dt_;
      q_int_ = q_int_.cwiseMax(plant.joint_limits_lo).cwiseMin(plant.joint_limits_hi);
    } catch (const Error& e) {
      out.error = ErrorMsg{e.code(), e.detail()};
    }
  }
  ++age_;

  history_.push_back(q_int_);
  history_.pop_front();
  const JointVector ref = history_.front();
  JointVector ff = ref;
  if (stream_) {
    const auto q_f = control::stream_push(*stream_, q_int_);
    if (q_f && comp_on_) ff = *q_f;
  }

  const JointVector q_c = tick_ == 0 ? ff : control::compensated_command(ff, ref_prev_, q_meas_, k_);
  q_meas_ = plant_step(plant, plant_, q_c);
  ref_prev_ = ref;

  err_window_.push_back((q_meas_ - ref).squaredNorm());
  if (err_window_.size() > static_cast<std::size_t>(config_.error_window)) err_window_.pop_front();
  double sum = 0.0;
  for (double e : err_window_) sum += e;

  out.state.t = tick_++;
  out.state.q = q_meas_;
  out.state.q_d = ref;
  out.state.q_c = q_c;
  out.state.err_l2_window = std::sqrt(sum);
  out.state.comp_on = comp_on_;
  out.state.latency_samples = latency_;
  return out;
}

}  // namespace flexff::teleop
