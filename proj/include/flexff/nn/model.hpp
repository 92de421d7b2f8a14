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
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "flexff/common/error.hpp"

namespace flexff::nn {

enum class Direction { kUnidirectional, kBidirectional };

// kLinearSurrogate forces both gates open and replaces tanh by the identity,
// turning each layer into h' = W_h x + U_h h + b_h. Used to check the adjoint
// and ILC machinery against explicit linear-algebra oracles.
enum class CellKind { kGru, kLinearSurrogate };

struct Topology {
  Direction direction = Direction::kUnidirectional;
  int n_joints = 7;
  int hidden = 64;
  int layers = 4;
  int window = 50;
  CellKind cell = CellKind::kGru;
  // Adds the raw input sample at read_position() to the prediction, so the
  // network only learns the difference between target and that sample.
  bool input_skip = false;

  int directions() const { return direction == Direction::kBidirectional ? 2 : 1; }
  int feature_width() const { return hidden * directions(); }
  int layer_input(int layer) const { return layer == 0 ? n_joints : feature_width(); }
  // Window position whose hidden states feed the readout.
  int read_position() const {
    return direction == Direction::kBidirectional ? window / 2 : window - 1;
  }

  bool operator==(const Topology&) const = default;
};

// Default topologies: 4 stacked layers forward, 2 bidirectional layers inverse.
Topology forward_topology(int n_joints, int window, int hidden = 64);
Topology inverse_topology(int n_joints, int window, int hidden = 64);

void validate(const Topology& topo);

// Mutable view of one GRU layer inside the flat parameter vector. Gate blocks
// are stacked row-wise in z, r, h order.
template <typename Scalar>
struct GruLayerView {
  Scalar* w = nullptr;  // 3H × in
  Scalar* u = nullptr;  // 3H × H
  Scalar* b = nullptr;  // 3H
  int input = 0;
  int hidden = 0;

  using Mat = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>,
                                            const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>,
                                            Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>>;
  using Vec = Eigen::Map<std::conditional_t<std::is_const_v<Scalar>, const Eigen::VectorXd,
                                            Eigen::VectorXd>>;

  Mat w_gate(int g) const { return Mat(w + g * hidden * input, hidden, input); }
  Mat u_gate(int g) const { return Mat(u + g * hidden * hidden, hidden, hidden); }
  Vec b_gate(int g) const { return Vec(b + g * hidden, hidden); }
  Mat w_z() const { return w_gate(0); }
  Mat w_r() const { return w_gate(1); }
  Mat w_h() const { return w_gate(2); }
  Mat u_z() const { return u_gate(0); }
  Mat u_r() const { return u_gate(1); }
  Mat u_h() const { return u_gate(2); }
  Vec b_z() const { return b_gate(0); }
  Vec b_r() const { return b_gate(1); }
  Vec b_h() const { return b_gate(2); }

  std::size_t size() const {
    return static_cast<std::size_t>(3 * hidden) * (input + hidden + 1);
  }
};

// Owning parameters of a single GRU layer.
struct GruLayerParams {
  int input = 0;
  int hidden = 0;
  std::vector<double> storage;

  GruLayerParams(int input_size, int hidden_size);
  GruLayerView<double> view();
  GruLayerView<const double> view() const;
};

// h' = (1 - z) ∘ h + z ∘ tanh(W_h x + U_h (r ∘ h) + b_h)
Eigen::VectorXd gru_cell_forward(const GruLayerParams& params, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& h, CellKind cell = CellKind::kGru);

// Fixed per-joint affine maps applied around the network: inputs are
// standardised before the first layer and predictions are rescaled after the
// readout. Not trained; fitted once from training data.
struct Normalizer {
  Eigen::VectorXd in_mean, in_scale, out_mean, out_scale;

  static Normalizer identity(int n_joints);
  bool operator==(const Normalizer& o) const;
};

class RecurrentModel {
 public:
  explicit RecurrentModel(const Topology& topo);

  // uniform(-s, s) with s = 1/sqrt(fan_in) for every block.
  static RecurrentModel random(const Topology& topo, std::uint64_t seed);

  const Topology& topology() const { return topo_; }
  const Normalizer& normalizer() const { return norm_; }
  void set_normalizer(Normalizer norm);

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  GruLayerView<double> layer(int layer, int dir);
  GruLayerView<const double> layer(int layer, int dir) const;

  // Readout: prediction = out_mean + out_scale ∘ (W_o feature + b_o), plus the
  // input sample at read_position() when the topology has input_skip.
  double* readout_w() { return params_.data() + readout_offset_; }
  const double* readout_w() const { return params_.data() + readout_offset_; }
  double* readout_b() { return readout_w() + topo_.n_joints * topo_.feature_width(); }
  const double* readout_b() const { return readout_w() + topo_.n_joints * topo_.feature_width(); }

  std::size_t layer_offset(int layer, int dir) const;
  std::size_t readout_offset() const { return readout_offset_; }

  bool operator==(const RecurrentModel& o) const {
    return topo_ == o.topo_ && norm_ == o.norm_ && params_ == o.params_;
  }

 private:
  Topology topo_;
  Normalizer norm_;
  std::vector<double> params_;
  std::vector<std::size_t> layer_offsets_;
  std::size_t readout_offset_ = 0;
};

// A T-step input window (n × T, column = time) with its single-step target.
struct WindowSample {
  Eigen::MatrixXd input;
  Eigen::VectorXd target;
};

// Inference (no dropout).
Eigen::VectorXd model_forward(const RecurrentModel& model, const Eigen::MatrixXd& window);

// Predictions for every length-T window of `sequence`: column j of the result
// is model_forward(sequence[:, j .. j+T-1]). Per-window results are identical
// to model_forward bit for bit.
Eigen::MatrixXd predict_sliding(const RecurrentModel& model, const Eigen::MatrixXd& sequence);

// ∂(cotangentᵀ · model_forward(window)) / ∂window.
Eigen::MatrixXd input_vjp(const RecurrentModel& model, const Eigen::MatrixXd& window,
                          const Eigen::VectorXd& cotangent);

// Σ_j input_vjp(window j, cotangents[:, j]) accumulated into a full-length
// gradient over `sequence` (n × N). cotangents is n × (N - T + 1).
Eigen::MatrixXd sliding_vjp(const RecurrentModel& model, const Eigen::MatrixXd& sequence,
                            const Eigen::MatrixXd& cotangents);

struct LossAndGrads {
  double mse = 0.0;
  std::vector<double> grads;
};

// Mean over batch and joints of the squared prediction error, with gradients
// exact for the realised dropout masks. Masks are drawn from `rng_state`,
// which is advanced. dropout_keep == 1 consumes no randomness.
LossAndGrads loss_and_grads(const RecurrentModel& model, std::span<const WindowSample> batch,
                            double dropout_keep, std::uint64_t& rng_state);

// Per-layer hidden state sequences (hidden × T) for each direction; used to
// inspect the recurrent stacks. Entries outside the computed range of the top
// layer are zero.
struct HiddenTrace {
  std::vector<std::vector<Eigen::MatrixXd>> layers;  // [layer][direction]
};
HiddenTrace trace_hidden(const RecurrentModel& model, const Eigen::MatrixXd& window);

// Pre-readout features (feature_width) for one window with inverted dropout
// applied at the given keep probability.
Eigen::VectorXd readout_features(const RecurrentModel& model, const Eigen::MatrixXd& window,
                                 double dropout_keep, std::uint64_t& rng_state);

}  // namespace flexff::nn
