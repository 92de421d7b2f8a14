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

#include <Eigen/Core>

#include "flexff/common/error.hpp"
#include "flexff/sim/kinematics.hpp"

namespace flexff::control {

// Dense strictly convex QP
//   min ½ xᵀ G x + aᵀ x   s.t.  E x = e,  C x ≥ c
// solved with the Goldfarb–Idnani dual active-set method. No feasible start
// point is needed. Throws Error("infeasible") when the constraints admit no
// solution.
struct DenseQp {
  Eigen::MatrixXd G;
  Eigen::VectorXd a;
  Eigen::MatrixXd E;  // may have zero rows
  Eigen::VectorXd e;
  Eigen::MatrixXd C;  // may have zero rows
  Eigen::VectorXd c;
};

struct DenseQpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;  // ≥ 0, zero for inactive rows
  int iterations = 0;
};

DenseQpResult solve_dense_qp(const DenseQp& qp);

// Resolved-velocity problem over x = (q̇, α_r, α_p):
//   ‖J q̇ − [α_r ω_d; α_p v_d]‖² + ε_r (α_r − 1)² + ε_p (α_p − 1)² + λ ‖P q̇‖²
// with rows of J and v_d ordered [angular; linear] and P the projector onto
// the null space of J. The λ term only picks the self-motion component, so an
// attainable command is reproduced exactly.
struct QpProblem {
  Eigen::MatrixXd J;           // 6 × n
  Eigen::Matrix<double, 6, 1> v_d = Eigen::Matrix<double, 6, 1>::Zero();
  double eps_r = 100.0;
  double eps_p = 100.0;
  double null_damping = 1e-2;
  // Orientation lock: J_ω q̇ = α_r ω_d.
  bool lock_orientation = false;
  // Box on q̇; empty vectors mean unbounded.
  Eigen::VectorXd qdot_lo;
  Eigen::VectorXd qdot_hi;
};

void validate(const QpProblem& p);

struct QpSolution {
  Eigen::VectorXd qdot;
  double alpha_r = 1.0;
  double alpha_p = 1.0;
  double objective = 0.0;
  int iterations = 0;
};

QpSolution resolved_velocity_solve(const QpProblem& p);

// The QP above in DenseQp form, x = (q̇, α_r, α_p). Exposed for tests.
DenseQp to_dense(const QpProblem& p);
double objective(const QpProblem& p, const Eigen::VectorXd& x);

// Joint velocity bounds that also keep q + q̇·dt inside [lo, hi].
void joint_limit_box(const Eigen::VectorXd& q, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                     const Eigen::VectorXd& vel_limit, double dt, Eigen::VectorXd& qdot_lo, Eigen::VectorXd& qdot_hi);

}  // namespace flexff::control
