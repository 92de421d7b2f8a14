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

#include "flexff/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "engine.hpp"

namespace flexff::nn {
namespace {

constexpr int kChunk = 128;

void pack_window(const Eigen::MatrixXd& w, int b, int batch, double* x) {
  const Eigen::Index n = w.rows();
  for (Eigen::Index t = 0; t < w.cols(); ++t)
    for (Eigen::Index j = 0; j < n; ++j) x[(t * batch + b) * n + j] = w(j, t);
}

void check_window(const Topology& topo, const Eigen::MatrixXd& window) {
  require(window.rows() == topo.n_joints && window.cols() == topo.window, "shape_mismatch",
          "window must be n_joints x window_len (" + std::to_string(topo.n_joints) + "x" +
              std::to_string(topo.window) + "), got " + std::to_string(window.rows()) + "x" +
              std::to_string(window.cols()));
}

}  // namespace

Topology forward_topology(int n_joints, int window, int hidden) {
  return {Direction::kUnidirectional, n_joints, hidden, 4, window, CellKind::kGru};
}

Topology inverse_topology(int n_joints, int window, int hidden) {
  return {Direction::kBidirectional, n_joints, hidden, 2, window, CellKind::kGru};
}

void validate(const Topology& topo) {
  require(topo.n_joints >= 1 && topo.hidden >= 1 && topo.layers >= 1 && topo.window >= 1,
          "invalid_topology", "topology sizes must be positive");
}

GruLayerParams::GruLayerParams(int input_size, int hidden_size)
    : input(input_size),
      hidden(hidden_size),
      storage(static_cast<std::size_t>(3 * hidden_size) * (input_size + hidden_size + 1), 0.0) {}

GruLayerView<double> GruLayerParams::view() {
  double* w = storage.data();
  double* u = w + 3 * hidden * input;
  return {w, u, u + 3 * hidden * hidden, input, hidden};
}

GruLayerView<const double> GruLayerParams::view() const {
  const double* w = storage.data();
  const double* u = w + 3 * hidden * input;
  return {w, u, u + 3 * hidden * hidden, input, hidden};
}

Eigen::VectorXd gru_cell_forward(const GruLayerParams& params, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& h, CellKind cell) {
  require(x.size() == params.input && h.size() == params.hidden, "shape_mismatch",
          "gru_cell_forward: x/h sizes do not match the layer");
  const std::size_t H = params.hidden;
  std::vector<double> z(H), r(H), n(H), rh(H), a(3 * H);
  Eigen::VectorXd out(H);
  detail::gru_step_forward(params.view(), 1, x.data(), x.size(), h.data(), H, out.data(), H,
                           z.data(), r.data(), n.data(), rh.data(), a.data(), cell);
  return out;
}

Normalizer Normalizer::identity(int n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n),
          Eigen::VectorXd::Ones(n)};
}

bool Normalizer::operator==(const Normalizer& o) const {
  return in_mean == o.in_mean && in_scale == o.in_scale && out_mean == o.out_mean &&
         out_scale == o.out_scale;
}

RecurrentModel::RecurrentModel(const Topology& topo) : topo_(topo), norm_(Normalizer::identity(topo.n_joints)) {
  validate(topo);
  std::size_t offset = 0;
  for (int l = 0; l < topo.layers; ++l) {
    for (int d = 0; d < topo.directions(); ++d) {
      layer_offsets_.push_back(offset);
      offset += static_cast<std::size_t>(3 * topo.hidden) * (topo.layer_input(l) + topo.hidden + 1);
    }
  }
  readout_offset_ = offset;
  offset += static_cast<std::size_t>(topo.n_joints) * (topo.feature_width() + 1);
  params_.assign(offset, 0.0);
}

RecurrentModel RecurrentModel::random(const Topology& topo, std::uint64_t seed) {
  RecurrentModel m(topo);
  std::uint64_t state = seed;
  const auto fill = [&](double* p, std::size_t count, double fan_in) {
    const double s = 1.0 / std::sqrt(fan_in);
    for (std::size_t i = 0; i < count; ++i) p[i] = s * (2.0 * detail::next_uniform(state) - 1.0);
  };
  for (int l = 0; l < topo.layers; ++l) {
    for (int d = 0; d < topo.directions(); ++d) {
      auto v = m.layer(l, d);
      const std::size_t H = topo.hidden;
      fill(v.w, 3 * H * v.input, v.input);
      fill(v.u, 3 * H * H, static_cast<double>(H));
      fill(v.b, 3 * H, static_cast<double>(H));
    }
  }
  const std::size_t fw = topo.feature_width();
  fill(m.readout_w(), topo.n_joints * fw, static_cast<double>(fw));
  fill(m.readout_b(), topo.n_joints, static_cast<double>(fw));
  return m;
}

void RecurrentModel::set_normalizer(Normalizer norm) {
  const auto n = topo_.n_joints;
  require(norm.in_mean.size() == n && norm.in_scale.size() == n && norm.out_mean.size() == n &&
              norm.out_scale.size() == n,
          "shape_mismatch", "normalizer size must equal n_joints");
  require((norm.in_scale.array() > 0.0).all() && (norm.out_scale.array() > 0.0).all(),
          "invalid_normalizer", "normalizer scales must be positive");
  norm_ = std::move(norm);
}

std::size_t RecurrentModel::layer_offset(int layer, int dir) const {
  return layer_offsets_.at(static_cast<std::size_t>(layer * topo_.directions() + dir));
}

GruLayerView<double> RecurrentModel::layer(int l, int dir) {
  double* w = params_.data() + layer_offset(l, dir);
  const int in = topo_.layer_input(l), H = topo_.hidden;
  double* u = w + 3 * H * in;
  return {w, u, u + 3 * H * H, in, H};
}

GruLayerView<const double> RecurrentModel::layer(int l, int dir) const {
  const double* w = params_.data() + layer_offset(l, dir);
  const int in = topo_.layer_input(l), H = topo_.hidden;
  const double* u = w + 3 * H * in;
  return {w, u, u + 3 * H * H, in, H};
}

Eigen::VectorXd model_forward(const RecurrentModel& model, const Eigen::MatrixXd& window) {
  const Topology& topo = model.topology();
  check_window(topo, window);
  detail::Engine engine(model, 1);
  std::vector<double> x(static_cast<std::size_t>(topo.window) * topo.n_joints);
  pack_window(window, 0, 1, x.data());
  engine.forward(x.data());
  return Eigen::Map<const Eigen::VectorXd>(engine.predictions(), topo.n_joints);
}

Eigen::MatrixXd predict_sliding(const RecurrentModel& model, const Eigen::MatrixXd& sequence) {
  const Topology& topo = model.topology();
  require(sequence.rows() == topo.n_joints, "shape_mismatch", "sequence rows must equal n_joints");
  require(sequence.cols() >= topo.window, "too_short", "sequence shorter than the model window");
  const Eigen::Index count = sequence.cols() - topo.window + 1;
  Eigen::MatrixXd out(topo.n_joints, count);
  const int n = topo.n_joints, T = topo.window;
  for (Eigen::Index start = 0; start < count; start += kChunk) {
    const int B = static_cast<int>(std::min<Eigen::Index>(kChunk, count - start));
    detail::Engine engine(model, B);
    std::vector<double> x(static_cast<std::size_t>(T) * B * n);
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) x[(static_cast<std::size_t>(t) * B + b) * n + j] = sequence(j, start + b + t);
    engine.forward(x.data());
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < n; ++j) out(j, start + b) = engine.predictions()[b * n + j];
  }
  return out;
}

Eigen::MatrixXd input_vjp(const RecurrentModel& model, const Eigen::MatrixXd& window,
                          const Eigen::VectorXd& cotangent) {
  const Topology& topo = model.topology();
  check_window(topo, window);
  require(cotangent.size() == topo.n_joints, "shape_mismatch", "cotangent size must equal n_joints");
  detail::Engine engine(model, 1);
  const std::size_t size = static_cast<std::size_t>(topo.window) * topo.n_joints;
  std::vector<double> x(size), gx(size, 0.0);
  pack_window(window, 0, 1, x.data());
  engine.forward(x.data());
  engine.backward(cotangent.data(), nullptr, gx.data());
  // Time-major single window is the same layout as a column-major n × T matrix.
  return Eigen::Map<const Eigen::MatrixXd>(gx.data(), topo.n_joints, topo.window);
}

Eigen::MatrixXd sliding_vjp(const RecurrentModel& model, const Eigen::MatrixXd& sequence,
                            const Eigen::MatrixXd& cotangents) {
  const Topology& topo = model.topology();
  require(sequence.rows() == topo.n_joints, "shape_mismatch", "sequence rows must equal n_joints");
  require(sequence.cols() >= topo.window, "too_short", "sequence shorter than the model window");
  const Eigen::Index count = sequence.cols() - topo.window + 1;
  require(cotangents.rows() == topo.n_joints && cotangents.cols() == count, "shape_mismatch",
          "cotangents must be n_joints x (N - T + 1)");
  const int n = topo.n_joints, T = topo.window;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, sequence.cols());
  for (Eigen::Index start = 0; start < count; start += kChunk) {
    const int B = static_cast<int>(std::min<Eigen::Index>(kChunk, count - start));
    if (cotangents.middleCols(start, B).isZero(0.0)) continue;
    detail::Engine engine(model, B);
    const std::size_t size = static_cast<std::size_t>(T) * B * n;
    std::vector<double> x(size), gx(size, 0.0), dp(static_cast<std::size_t>(B) * n);
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) x[(static_cast<std::size_t>(t) * B + b) * n + j] = sequence(j, start + b + t);
      for (int j = 0; j < n; ++j) dp[static_cast<std::size_t>(b) * n + j] = cotangents(j, start + b);
    }
    engine.forward(x.data());
    engine.backward(dp.data(), nullptr, gx.data());
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) grad(j, start + b + t) += gx[(static_cast<std::size_t>(t) * B + b) * n + j];
  }
  return grad;
}

LossAndGrads loss_and_grads(const RecurrentModel& model, std::span<const WindowSample> batch,
                            double dropout_keep, std::uint64_t& rng_state) {
  const Topology& topo = model.topology();
  require(!batch.empty(), "empty_batch", "loss_and_grads needs at least one sample");
  require(dropout_keep > 0.0 && dropout_keep <= 1.0, "invalid_argument", "dropout_keep must be in (0, 1]");
  const int B = static_cast<int>(batch.size()), n = topo.n_joints;
  std::vector<double> x(static_cast<std::size_t>(topo.window) * B * n);
  for (int b = 0; b < B; ++b) {
    check_window(topo, batch[b].input);
    require(batch[b].target.size() == n, "shape_mismatch", "target size must equal n_joints");
    pack_window(batch[b].input, b, B, x.data());
  }
  detail::Engine engine(model, B);
  engine.forward(x.data(), dropout_keep, &rng_state);

  LossAndGrads out;
  out.grads.assign(model.param_count(), 0.0);
  std::vector<double> dp(static_cast<std::size_t>(B) * n);
  const double denom = static_cast<double>(B) * n;
  double sse = 0.0;
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < n; ++j) {
      const double e = engine.predictions()[b * n + j] - batch[b].target[j];
      sse += e * e;
      dp[static_cast<std::size_t>(b) * n + j] = 2.0 * e / denom;
    }
  out.mse = sse / denom;
  engine.backward(dp.data(), out.grads.data(), nullptr);
  return out;
}

HiddenTrace trace_hidden(const RecurrentModel& model, const Eigen::MatrixXd& window) {
  const Topology& topo = model.topology();
  check_window(topo, window);
  detail::Engine engine(model, 1);
  std::vector<double> x(static_cast<std::size_t>(topo.window) * topo.n_joints);
  pack_window(window, 0, 1, x.data());
  engine.forward(x.data());
  HiddenTrace trace;
  const int H = topo.hidden, Hd = topo.feature_width();
  for (int l = 0; l < topo.layers; ++l) {
    std::vector<Eigen::MatrixXd> dirs;
    const auto& hid = engine.hidden(l);
    for (int d = 0; d < topo.directions(); ++d) {
      Eigen::MatrixXd m(H, topo.window);
      for (int t = 0; t < topo.window; ++t)
        for (int i = 0; i < H; ++i) m(i, t) = hid[static_cast<std::size_t>(t) * Hd + d * H + i];
      dirs.push_back(std::move(m));
    }
    trace.layers.push_back(std::move(dirs));
  }
  return trace;
}

Eigen::VectorXd readout_features(const RecurrentModel& model, const Eigen::MatrixXd& window,
                                 double dropout_keep, std::uint64_t& rng_state) {
  const Topology& topo = model.topology();
  check_window(topo, window);
  detail::Engine engine(model, 1);
  std::vector<double> x(static_cast<std::size_t>(topo.window) * topo.n_joints);
  pack_window(window, 0, 1, x.data());
  engine.forward(x.data(), dropout_keep, &rng_state);
  return Eigen::Map<const Eigen::VectorXd>(engine.features(), topo.feature_width());
}

}  // namespace flexff::nn
