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

#include <string>
#include <vector>

#include <Eigen/Core>

#include "flexff/sim/trajectory.hpp"

namespace flexff::harness {

// Per-row tracking error norms over time: rows are joints (rad) or Cartesian
// axes (m).
struct Metrics {
  Eigen::VectorXd l2;    // sqrt(Σ_t e_i(t)²)
  Eigen::VectorXd linf;  // max_t |e_i(t)|

  bool operator==(const Metrics& o) const { return l2 == o.l2 && linf == o.linf; }
};

Metrics compute_metrics(const Eigen::MatrixXd& q, const Eigen::MatrixXd& q_d);
Metrics compute_metrics(const Trajectory& q, const Trajectory& q_d);

// 100 · (1 − l2_approach / l2_baseline) per row. A row where both errors are
// zero counts as 0 %.
Eigen::VectorXd improvement_per_row(const Metrics& baseline, const Metrics& approach);

// Unweighted mean of improvement_per_row over the given rows (all rows when
// empty).
double mean_improvement(const Metrics& baseline, const Metrics& approach, const std::vector<int>& rows = {});

}  // namespace flexff::harness
