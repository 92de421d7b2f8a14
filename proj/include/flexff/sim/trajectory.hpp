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

#include "flexff/common/error.hpp"

namespace flexff {

using JointVector = Eigen::VectorXd;

// n_joints × N joint-position samples at a fixed rate. Column t is the sample
// at time t / sample_rate. Used for desired, measured, commanded and
// feedforward trajectories alike.
struct Trajectory {
  Eigen::MatrixXd data;
  double sample_rate = 100.0;

  Trajectory() = default;
  Trajectory(Eigen::MatrixXd d, double rate) : data(std::move(d)), sample_rate(rate) {}
  Trajectory(Eigen::Index n_joints, Eigen::Index n_samples, double rate)
      : data(Eigen::MatrixXd::Zero(n_joints, n_samples)), sample_rate(rate) {}

  Eigen::Index n_joints() const { return data.rows(); }
  Eigen::Index length() const { return data.cols(); }
  auto sample(Eigen::Index t) { return data.col(t); }
  auto sample(Eigen::Index t) const { return data.col(t); }

  bool operator==(const Trajectory& o) const {
    return sample_rate == o.sample_rate && data.rows() == o.data.rows() &&
           data.cols() == o.data.cols() && data == o.data;
  }
};

inline void validate(const Trajectory& traj) {
  require(traj.length() >= 1, "invalid_trajectory", "trajectory has no samples");
  require(traj.sample_rate > 0.0, "invalid_trajectory", "sample_rate must be positive");
  require(traj.data.allFinite(), "invalid_trajectory", "trajectory contains non-finite values");
}

}  // namespace flexff
