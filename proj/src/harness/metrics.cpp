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

#include "flexff/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flexff/common/error.hpp"

namespace flexff::harness {

Metrics compute_metrics(const Eigen::MatrixXd& q, const Eigen::MatrixXd& q_d) {
  require(q.rows() == q_d.rows() && q.cols() == q_d.cols(), "shape_mismatch",
          "measured and desired trajectories differ in shape");
  Metrics m;
  m.l2 = Eigen::VectorXd::Zero(q.rows());
  m.linf = Eigen::VectorXd::Zero(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double sq = 0.0, peak = 0.0;
    for (Eigen::Index t = 0; t < q.cols(); ++t) {
      const double e = q(i, t) - q_d(i, t);
      sq += e * e;
      peak = std::max(peak, std::abs(e));
    }
    m.l2[i] = std::sqrt(sq);
    m.linf[i] = peak;
  }
  return m;
}

Metrics compute_metrics(const Trajectory& q, const Trajectory& q_d) { return compute_metrics(q.data, q_d.data); }

Eigen::VectorXd improvement_per_row(const Metrics& baseline, const Metrics& approach) {
  require(baseline.l2.size() == approach.l2.size(), "shape_mismatch", "metrics have different row counts");
  Eigen::VectorXd out(baseline.l2.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double b = baseline.l2[i], a = approach.l2[i];
    if (b == 0.0) {
      out[i] = a == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    } else {
      out[i] = 100.0 * (1.0 - a / b);
    }
  }
  return out;
}

double mean_improvement(const Metrics& baseline, const Metrics& approach, const std::vector<int>& rows) {
  const Eigen::VectorXd per = improvement_per_row(baseline, approach);
  if (rows.empty()) return per.size() == 0 ? 0.0 : per.mean();
  double sum = 0.0;
  for (int r : rows) {
    require(r >= 0 && r < per.size(), "invalid_argument", "row index out of range");
    sum += per[r];
  }
  return sum / static_cast<double>(rows.size());
}

}  // namespace flexff::harness
