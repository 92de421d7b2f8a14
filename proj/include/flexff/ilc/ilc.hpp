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

#include <functional>
#include <string>
#include <vector>

#include "flexff/nn/model.hpp"
#include "flexff/sim/plant.hpp"

// Gradient-based iterative learning control on a learned forward model.
//
// Index convention: with window T, the rollout column j is the model's
// prediction of q(j + T) from u(j .. j+T-1), so a length-N input yields N - T
// predictions aligned with q_d(T .. N-1). The first T samples have no
// prediction; they are left out of the objective and u is held at q_d there.

namespace flexff::ilc {

struct IlcConfig {
  int max_iters = 100;
  // Stop when the relative error decrease over `convergence_window`
  // iterations falls below this.
  double convergence_tol = 1e-4;
  int convergence_window = 3;
  // Line-search grid: α_ref · 2^e for e in [grid_min_exp, grid_max_exp],
  // followed by golden-section refinement around the best grid point.
  int grid_min_exp = -8;
  int grid_max_exp = 2;
  int golden_iters = 8;
  // Clamp every candidate input to [joint_limits_lo, joint_limits_hi]. Limits
  // left empty disable clamping.
  bool clamp_to_limits = true;
  Eigen::VectorXd joint_limits_lo;
  Eigen::VectorXd joint_limits_hi;
};

void validate(const IlcConfig& config);

enum class IlcStop { kMaxIters, kConverged, kNoDescent, kZeroError };
std::string to_string(IlcStop stop);

struct IlcState {
  Trajectory u;                       // current input iterate u^k
  Trajectory e_q;                     // error at u^k over samples T .. N-1
  double alpha = 0.0;                 // last accepted step
  int iter = 0;                       // accepted iterations
  std::vector<double> error_history;  // ℓ2 error, initial value first
  IlcStop stop = IlcStop::kMaxIters;
};

// Model prediction for every window position: n × (N - T).
Trajectory predict_rollout(const nn::RecurrentModel& model, const Trajectory& u);

// ∂(½‖predict_rollout(u) − q_d(T..N-1)‖²)/∂u, full length.
Trajectory ilc_gradient(const nn::RecurrentModel& model, const Trajectory& u, const Trajectory& q_d);

// Frobenius norm of rollout − q_d(T..N-1).
double rollout_error(const Trajectory& rollout, const Trajectory& q_d);

struct LineSearchResult {
  double alpha = 0.0;  // 0 when no tried step lowers the error
  double error = 0.0;  // error at alpha
  bool converged = false;
};

// Residual (prediction or measurement minus q_d over T .. N-1) of the
// candidate input at step α.
using Residual = std::function<Eigen::MatrixXd(double alpha)>;

// Searches α ≥ 0 minimising ‖residual(α)‖ given r0 = residual(0). The grid is
// scaled by the Gauss–Newton step (J g)ᵀ r0 / ‖J g‖², with J g estimated from
// one small probe step. The result never has a larger error than r0.
LineSearchResult line_search(const Residual& residual, const Eigen::MatrixXd& r0, const Eigen::MatrixXd& grad,
                             const IlcConfig& config);

// Search on the model-predicted error; the candidate input is
// clamp(u − α·grad).
LineSearchResult line_search(const nn::RecurrentModel& model, const Trajectory& u, const Trajectory& grad,
                             const Trajectory& q_d, const IlcConfig& config);

// u⁰ = q_d, then u^{k+1} = clamp(u^k − α_k ∇) with the prefix frozen.
IlcState ilc_refine(const nn::RecurrentModel& model, const Trajectory& q_d, const IlcConfig& config);

// Same loop with the plant as the rollout: the error is measured by
// simulate(), the descent direction is the model adjoint applied to the
// measured error, and only error-decreasing steps are accepted.
IlcState ilc_on_plant(const PlantConfig& plant, const nn::RecurrentModel& model, const Trajectory& q_d,
                      const Trajectory& u0, const IlcConfig& config);

}  // namespace flexff::ilc
