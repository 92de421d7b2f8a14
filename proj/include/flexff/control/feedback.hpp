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
#include <functional>
#include <optional>
#include <vector>

#include "flexff/nn/model.hpp"
#include "flexff/sim/plant.hpp"

namespace flexff::control {

enum class ControlMode { kBaseline, kFeedforward };

struct ControllerConfig {
  // Proportional feedback gain; one entry broadcast to every joint or one per
  // joint.
  Eigen::VectorXd k = Eigen::VectorXd::Constant(1, 0.3);
  ControlMode mode = ControlMode::kBaseline;

  Eigen::VectorXd gains(Eigen::Index n_joints) const;
};

// q_c(t+1) = q_d(t+1) − k (q(t) − q_d(t))
JointVector baseline_command(const JointVector& q_d_next, const JointVector& q_d_now, const JointVector& q_now,
                             const Eigen::VectorXd& k);

// q_c(t+1) = q_f(t+1) − k (q(t) − q_d(t))
JointVector compensated_command(const JointVector& q_f_next, const JointVector& q_d_now, const JointVector& q_now,
                                const Eigen::VectorXd& k);

struct ClosedLoopResult {
  Trajectory q;    // measured
  Trajectory q_c;  // commanded
};

// Advances some plant by one sample under a command and returns its output.
using PlantStep = std::function<JointVector(const JointVector& q_c)>;

// q_c(0) = ff(0); for every t: q(t) = step(q_c(t)), then
// q_c(t+1) = ff(t+1) − k (q(t) − q_d(t)). ff is q_f in feedforward mode and
// q_d in baseline mode.
ClosedLoopResult run_closed_loop(const PlantStep& step, const Trajectory& q_d, const std::optional<Trajectory>& q_f,
                                 const ControllerConfig& controller);

// Same loop against the simulated plant started at rest at q_c(0).
ClosedLoopResult run_closed_loop(const PlantConfig& plant, const Trajectory& q_d, const std::optional<Trajectory>& q_f,
                                 const ControllerConfig& controller);

// Sliding buffer of the last T desired setpoints for the bidirectional
// compensator. After the T-th arrival every push emits q_f for the sample
// T/2 positions behind the newest, so the steady-state latency is T/2 − 1
// samples after the current one.
class StreamState {
 public:
  explicit StreamState(const nn::RecurrentModel& model);

  const nn::RecurrentModel& model() const { return *model_; }
  int window() const { return window_; }
  std::uint64_t arrivals() const { return arrivals_; }
  std::uint64_t emitted() const { return emitted_; }
  bool primed() const { return arrivals_ >= static_cast<std::uint64_t>(window_); }
  // Trajectory index of the next emission.
  std::uint64_t next_index() const { return emitted_ + static_cast<std::uint64_t>(window_ / 2); }

  // Buffered samples, oldest first.
  Eigen::MatrixXd buffer() const;

 private:
  friend std::optional<JointVector> stream_push(StreamState& state, const JointVector& q_d_sample);

  const nn::RecurrentModel* model_;
  int window_;
  Eigen::MatrixXd ring_;  // n × T
  std::uint64_t arrivals_ = 0;
  std::uint64_t emitted_ = 0;
};

std::optional<JointVector> stream_push(StreamState& state, const JointVector& q_d_sample);

// Offline compensation: q_f(t) = model(q_d(t−T/2 .. t+T/2−1)) for
// t ∈ [T/2, N−T/2]; other samples copy q_d.
Trajectory filter_trajectory(const nn::RecurrentModel& model, const Trajectory& q_d);

}  // namespace flexff::control
