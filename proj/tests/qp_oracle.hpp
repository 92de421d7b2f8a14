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

#include <cmath>

#include <Eigen/Dense>

#include "flexff/control/qp.hpp"

namespace flexff::testing {

// Log-barrier interior-point reference for min ½xᵀGx + aᵀx, E x = e, C x ≥ c.
// Equalities are eliminated through a null-space basis; x_start must satisfy
// the equalities and the inequalities strictly.
inline Eigen::VectorXd barrier_solve(const control::DenseQp& qp, const Eigen::VectorXd& x_start) {
  const Eigen::Index nv = qp.G.rows();
  Eigen::MatrixXd Z;
  if (qp.E.rows() > 0) {
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(qp.E);
    Z = lu.kernel();
    if (lu.rank() == nv) return x_start;
  } else {
    Z = Eigen::MatrixXd::Identity(nv, nv);
  }
  const Eigen::MatrixXd Gz = Z.transpose() * qp.G * Z;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(Z.cols());
  const auto point = [&](const Eigen::VectorXd& yy) { return Eigen::VectorXd(x_start + Z * yy); };
  const auto merit = [&](const Eigen::VectorXd& yy, double t) {
    const Eigen::VectorXd x = point(yy);
    const Eigen::VectorXd slack = qp.C * x - qp.c;
    if (slack.size() > 0 && slack.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    return t * (0.5 * x.dot(qp.G * x) + qp.a.dot(x)) - slack.array().log().sum();
  };
  for (double t = 1.0; t < 1e15; t *= 4.0) {
    for (int it = 0; it < 200; ++it) {
      const Eigen::VectorXd x = point(y);
      const Eigen::VectorXd slack = qp.C * x - qp.c;
      const Eigen::VectorXd inv = slack.cwiseInverse();
      const Eigen::VectorXd grad = Z.transpose() * (t * (qp.G * x + qp.a) - qp.C.transpose() * inv);
      const Eigen::MatrixXd CZ = qp.C * Z;
      const Eigen::MatrixXd hess = t * Gz + CZ.transpose() * inv.cwiseAbs2().asDiagonal() * CZ;
      const Eigen::VectorXd step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      if (decrement < 1e-20) break;
      double s = 1.0;
      const double f0 = merit(y, t);
      while (!(merit(y + s * step, t) <= f0 - 0.25 * s * decrement) && s > 1e-20) s *= 0.5;
      // No acceptable step: the Newton direction is numerically useless here.
      if (s <= 1e-20) break;
      y += s * step;
    }
  }
  return point(y);
}

}  // namespace flexff::testing
