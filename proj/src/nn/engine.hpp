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
#include <vector>

#include "flexff/common/rng.hpp"
#include "flexff/nn/model.hpp"

namespace flexff::nn::detail {

using flexff::next_random;
using flexff::next_uniform;

// Batched forward/backward evaluation of a RecurrentModel over B windows.
// Inputs are time-major: x[t][b][j] for t < T, b < B, j < n, in raw units.
// One GRU step for B rows. h_prev == nullptr means a zero initial state.
// z, r, n, rh receive the gate activations (B × H); a is B × 3H scratch.
void gru_step_forward(const GruLayerView<const double>& view, std::size_t B, const double* x,
                      std::size_t ldx, const double* h_prev, std::size_t ldh, double* h_out,
                      std::size_t ldo, double* z, double* r, double* n, double* rh, double* a,
                      CellKind cell);

class Engine {
 public:
  Engine(const RecurrentModel& model, int batch);

  int batch() const { return batch_; }

  // Dropout is applied when keep < 1 (rng must then be non-null).
  void forward(const double* x_raw, double keep = 1.0, std::uint64_t* rng = nullptr);

  const double* predictions() const { return pred_.data(); }  // B × n
  const double* features() const;                            // B × Hd

  // d_pred is B × n. grad_params (param_count) and grad_input (T × B × n,
  // raw units) are accumulated into when non-null.
  void backward(const double* d_pred, double* grad_params, double* grad_input);

  // Raw hidden outputs of a layer: T × B × Hd.
  const std::vector<double>& hidden(int layer) const { return hid_[layer]; }

 private:
  struct Gates {
    std::vector<double> z, r, n, rh;  // T × B × H each
  };

  void step_forward(int layer, int dir, int t, int t_prev);
  void step_backward(int layer, int dir, int t, int t_prev, double* dh, double* grad_params,
                     std::vector<double>& d_in);
  const double* layer_input(int layer, int t) const;
  int layer_input_ld(int layer) const;
  // Processing range for (layer, direction): first and last time index.
  std::pair<int, int> span(int layer, int dir) const;

  const RecurrentModel& model_;
  Topology topo_;
  int batch_;
  bool dropout_ = false;
  std::vector<double> x_;                 // normalised input, T × B × n
  std::vector<std::vector<double>> hid_;  // per layer, T × B × Hd
  std::vector<std::vector<double>> act_;  // post-dropout copy (empty when off)
  std::vector<std::vector<double>> mask_;
  std::vector<std::vector<Gates>> gates_;  // [layer][dir]
  std::vector<double> a_;                  // B × 3H scratch
  std::vector<double> pred_;               // B × n
  std::vector<double> dz_, dhp_, drh_;     // B × H backward scratch
};

}  // namespace flexff::nn::detail
