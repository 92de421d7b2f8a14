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

#include "flexff/nn/model.hpp"

namespace flexff::testing {

// Explicit linear map of a one-layer linear-surrogate unidirectional model:
// pred = out_mean + out_scale ∘ (W_o h_{T-1} + b_o), h_t = W x̃_t + U h_{t-1} + b,
// x̃_t = (x_t - in_mean) / in_scale, plus the raw sample at read_position()
// when input_skip is set. Returns B with pred = B vec(window) + c.
inline Eigen::MatrixXd linear_surrogate_map(const nn::RecurrentModel& m) {
  const nn::Topology& topo = m.topology();
  const int n = topo.n_joints, T = topo.window, H = topo.hidden;
  const auto v = m.layer(0, 0);
  const Eigen::MatrixXd W = v.w_h(), U = v.u_h();
  const Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>> Wo(m.readout_w(), n, H);
  const nn::Normalizer& norm = m.normalizer();
  Eigen::MatrixXd map(n, n * T);
  Eigen::MatrixXd upow = Eigen::MatrixXd::Identity(H, H);
  for (int t = T - 1; t >= 0; --t) {
    Eigen::MatrixXd block = norm.out_scale.asDiagonal() * (Wo * upow * W);
    block = block * norm.in_scale.cwiseInverse().asDiagonal();
    map.middleCols(t * n, n) = block;
    upow = upow * U;
  }
  if (topo.input_skip) map.middleCols(topo.read_position() * n, n) += Eigen::MatrixXd::Identity(n, n);
  return map;
}

// Block-Toeplitz map of the sliding rollout over a length-N sequence: block
// row j holds the window map at columns j .. j+T-1 (u vectorised column-major).
inline Eigen::MatrixXd rollout_map(const nn::RecurrentModel& m, int N) {
  const int n = m.topology().n_joints, T = m.topology().window;
  const Eigen::MatrixXd window = linear_surrogate_map(m);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n * (N - T), n * N);
  for (int j = 0; j < N - T; ++j) G.block(j * n, j * n, n, n * T) = window;
  return G;
}

}  // namespace flexff::testing
