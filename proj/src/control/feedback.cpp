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

#include "flexff/control/feedback.hpp"

namespace flexff::control {

Eigen::VectorXd ControllerConfig::gains(Eigen::Index n_joints) const {
  require(k.size() == 1 || k.size() == n_joints, "invalid_config", "gain k needs one entry or one per joint");
  require(k.allFinite(), "invalid_config", "gain k must be finite");
  return k.size() == 1 ? Eigen::VectorXd::Constant(n_joints, k[0]) : k;
}

JointVector baseline_command(const JointVector& q_d_next, const JointVector& q_d_now, const JointVector& q_now,
                             const Eigen::VectorXd& k) {
  return compensated_command(q_d_next, q_d_now, q_now, k);
}

JointVector compensated_command(const JointVector& q_f_next, const JointVector& q_d_now, const JointVector& q_now,
                                const Eigen::VectorXd& k) {
  require(q_f_next.size() == q_d_now.size() && q_now.size() == q_d_now.size() && k.size() == q_d_now.size(),
          "shape_mismatch", "controller inputs must have equal sizes");
  return q_f_next - k.cwiseProduct(q_now - q_d_now);
}

ClosedLoopResult run_closed_loop(const PlantStep& step, const Trajectory& q_d, const std::optional<Trajectory>& q_f,
                                 const ControllerConfig& controller) {
  validate(q_d);
  const Trajectory* ff = &q_d;
  if (controller.mode == ControlMode::kFeedforward) {
    require(q_f.has_value(), "missing_feedforward", "feedforward mode needs q_f");
    require(q_f->n_joints() == q_d.n_joints() && q_f->length() == q_d.length() &&
                q_f->sample_rate == q_d.sample_rate,
            "shape_mismatch", "q_f must match q_d in shape and rate");
    ff = &*q_f;
  }
  const Eigen::VectorXd k = controller.gains(q_d.n_joints());
  ClosedLoopResult out{Trajectory(q_d.n_joints(), q_d.length(), q_d.sample_rate),
                       Trajectory(q_d.n_joints(), q_d.length(), q_d.sample_rate)};
  out.q_c.sample(0) = ff->sample(0);
  for (Eigen::Index t = 0; t < q_d.length(); ++t) {
    out.q.sample(t) = step(out.q_c.sample(t));
    if (t + 1 < q_d.length())
      out.q_c.sample(t + 1) = compensated_command(ff->sample(t + 1), q_d.sample(t), out.q.sample(t), k);
  }
  return out;
}

ClosedLoopResult run_closed_loop(const PlantConfig& plant, const Trajectory& q_d, const std::optional<Trajectory>& q_f,
                                 const ControllerConfig& controller) {
  validate(q_d);
  require(std::abs(q_d.sample_rate * plant.dt - 1.0) < 1e-9, "rate_mismatch", "q_d sample_rate must equal 1/dt");
  const bool ff = controller.mode == ControlMode::kFeedforward && q_f.has_value();
  PlantState state = plant_init(plant, ff ? JointVector(q_f->sample(0)) : JointVector(q_d.sample(0)));
  return run_closed_loop([&](const JointVector& q_c) { return plant_step(plant, state, q_c); }, q_d, q_f,
                         controller);
}

StreamState::StreamState(const nn::RecurrentModel& model) : model_(&model), window_(model.topology().window) {
  require(model.topology().direction == nn::Direction::kBidirectional, "invalid_model",
          "streaming compensation needs a bidirectional model");
  require(window_ % 2 == 0, "invalid_model", "streaming compensation needs an even window");
  ring_ = Eigen::MatrixXd::Zero(model.topology().n_joints, window_);
}

Eigen::MatrixXd StreamState::buffer() const {
  const auto count = static_cast<Eigen::Index>(std::min<std::uint64_t>(arrivals_, window_));
  Eigen::MatrixXd out(ring_.rows(), count);
  const std::uint64_t first = arrivals_ - static_cast<std::uint64_t>(count);
  for (Eigen::Index i = 0; i < count; ++i)
    out.col(i) = ring_.col(static_cast<Eigen::Index>((first + static_cast<std::uint64_t>(i)) % window_));
  return out;
}

std::optional<JointVector> stream_push(StreamState& s, const JointVector& q_d_sample) {
  require(q_d_sample.size() == s.ring_.rows(), "shape_mismatch", "sample size must equal the model's joint count");
  require(q_d_sample.allFinite(), "non_finite", "sample contains non-finite values");
  s.ring_.col(static_cast<Eigen::Index>(s.arrivals_ % static_cast<std::uint64_t>(s.window_))) = q_d_sample;
  ++s.arrivals_;
  if (!s.primed()) return std::nullopt;
  ++s.emitted_;
  return nn::model_forward(*s.model_, s.buffer());
}

Trajectory filter_trajectory(const nn::RecurrentModel& model, const Trajectory& q_d) {
  const int T = model.topology().window;
  require(model.topology().direction == nn::Direction::kBidirectional && T % 2 == 0, "invalid_model",
          "filtering needs a bidirectional model with an even window");
  require(q_d.n_joints() == model.topology().n_joints, "shape_mismatch", "q_d joint count does not match the model");
  require(q_d.length() >= T, "sequence_too_short",
          "filtering needs at least T = " + std::to_string(T) + " samples, got " + std::to_string(q_d.length()));
  Trajectory q_f = q_d;
  q_f.data.middleCols(T / 2, q_d.length() - T + 1) = nn::predict_sliding(model, q_d.data);
  return q_f;
}

}  // namespace flexff::control
