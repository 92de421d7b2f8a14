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

#include "flexff/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "engine.hpp"

namespace flexff::nn {
namespace {

// Fisher–Yates with the splitmix stream so the permutation is identical on
// every platform.
void shuffle(std::vector<std::size_t>& v, std::uint64_t& state) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = detail::next_random(state) % i;
    std::swap(v[i - 1], v[j]);
  }
}

Normalizer fit_normalizer(const WindowSet& data, const std::vector<std::size_t>& train_idx, const Topology& topo) {
  const int n = topo.n_joints;
  // Statistics over the source sequences that the training windows touch.
  std::vector<char> used(data.inputs.size(), 0);
  for (std::size_t i : train_idx) used[data.refs[i].sequence] = 1;
  Eigen::VectorXd in_sum = Eigen::VectorXd::Zero(n), in_sq = in_sum, out_sum = in_sum, out_sq = in_sum;
  double in_count = 0, out_count = 0;
  for (std::size_t s = 0; s < used.size(); ++s) {
    if (!used[s]) continue;
    in_sum += data.inputs[s].rowwise().sum();
    in_sq += data.inputs[s].array().square().matrix().rowwise().sum();
    in_count += static_cast<double>(data.inputs[s].cols());
    out_sum += data.targets[s].rowwise().sum();
    out_sq += data.targets[s].array().square().matrix().rowwise().sum();
    out_count += static_cast<double>(data.targets[s].cols());
  }
  if (topo.input_skip) {
    // The network output only has to cover target minus the skipped sample.
    out_sum.setZero();
    out_sq.setZero();
    out_count = 0;
    for (std::size_t i : train_idx) {
      const WindowSet::Ref& r = data.refs[i];
      const Eigen::VectorXd d = data.targets[r.sequence].col(r.target) -
                                data.inputs[r.sequence].col(r.start + topo.read_position());
      out_sum += d;
      out_sq += d.array().square().matrix();
      out_count += 1.0;
    }
  }
  Normalizer norm = Normalizer::identity(n);
  for (int j = 0; j < n; ++j) {
    norm.in_mean[j] = in_sum[j] / in_count;
    norm.in_scale[j] = std::max(std::sqrt(std::max(in_sq[j] / in_count - norm.in_mean[j] * norm.in_mean[j], 0.0)), 1e-3);
    norm.out_mean[j] = out_sum[j] / out_count;
    norm.out_scale[j] = std::max(std::sqrt(std::max(out_sq[j] / out_count - norm.out_mean[j] * norm.out_mean[j], 0.0)), 1e-3);
  }
  return norm;
}

}  // namespace

WindowSample WindowSet::sample(std::size_t i) const {
  const Ref& r = refs.at(i);
  return {inputs[r.sequence].middleCols(r.start, window), targets[r.sequence].col(r.target)};
}

void validate(const TrainConfig& c) {
  require(c.dropout_keep > 0.0 && c.dropout_keep <= 1.0, "invalid_config", "dropout_keep must be in (0, 1]");
  require(c.batch_size >= 1, "invalid_config", "batch_size must be >= 1");
  require(c.max_iters >= 0, "invalid_config", "max_iters must be >= 0");
  require(c.learning_rate > 0.0, "invalid_config", "learning_rate must be positive");
  require(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0, "invalid_config",
          "validation_fraction must be in [0, 1)");
  require(c.log_interval >= 1, "invalid_config", "log_interval must be >= 1");
}

EvalResult evaluate(const RecurrentModel& model, const WindowSet& data,
                    const std::vector<std::size_t>& indices) {
  const Topology& topo = model.topology();
  const int n = topo.n_joints, T = topo.window;
  EvalResult res;
  if (indices.empty()) return res;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sq = sum, err = sum;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < indices.size(); start += kChunk) {
    const int B = static_cast<int>(std::min(kChunk, indices.size() - start));
    std::vector<double> x(static_cast<std::size_t>(T) * B * n);
    for (int b = 0; b < B; ++b) {
      const auto& r = data.refs[indices[start + b]];
      const Eigen::MatrixXd& seq = data.inputs[r.sequence];
      for (int t = 0; t < T; ++t)
        for (int j = 0; j < n; ++j) x[(static_cast<std::size_t>(t) * B + b) * n + j] = seq(j, r.start + t);
    }
    detail::Engine engine(model, B);
    engine.forward(x.data());
    for (int b = 0; b < B; ++b) {
      const auto& r = data.refs[indices[start + b]];
      for (int j = 0; j < n; ++j) {
        const double target = data.targets[r.sequence](j, r.target);
        const double e = engine.predictions()[b * n + j] - target;
        err[j] += e * e;
        sum[j] += target;
        sq[j] += target * target;
      }
    }
  }
  const double count = static_cast<double>(indices.size());
  res.mse = err.sum() / (count * n);
  double nmse = 0.0;
  for (int j = 0; j < n; ++j) {
    const double var = std::max(sq[j] / count - (sum[j] / count) * (sum[j] / count), 1e-12);
    nmse += err[j] / count / var;
  }
  res.nmse = nmse / n;
  return res;
}

TrainResult train(const RecurrentModel& initial, const WindowSet& data, const TrainConfig& cfg,
                  const std::function<void(const TrainRecord&)>& on_record) {
  validate(cfg);
  const Topology& topo = initial.topology();
  require(data.window == topo.window, "shape_mismatch", "dataset window differs from model window");
  TrainResult result{initial, {}};
  if (cfg.max_iters == 0) return result;

  std::uint64_t rng = cfg.rng_seed;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(order.size())));
  std::vector<std::size_t> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  require(train_idx.size() >= static_cast<std::size_t>(cfg.batch_size), "dataset_too_small",
          "training split (" + std::to_string(train_idx.size()) + " windows) is smaller than one batch (" +
              std::to_string(cfg.batch_size) + ")");
  if (val_idx.size() > static_cast<std::size_t>(cfg.validation_max_samples)) {
    val_idx.resize(static_cast<std::size_t>(cfg.validation_max_samples));
  }

  RecurrentModel& model = result.model;
  if (cfg.fit_normalizer) model.set_normalizer(fit_normalizer(data, train_idx, topo));

  AdamState opt(model.param_count());
  std::vector<WindowSample> batch(static_cast<std::size_t>(cfg.batch_size));
  std::size_t cursor = train_idx.size();
  double running = 0.0;
  int running_count = 0;
  const double decay = std::pow(cfg.final_lr_fraction, 1.0 / std::max(cfg.max_iters - 1, 1));
  double lr = cfg.learning_rate;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    for (auto& s : batch) {
      if (cursor == train_idx.size()) {
        shuffle(train_idx, rng);
        cursor = 0;
      }
      s = data.sample(train_idx[cursor++]);
    }
    LossAndGrads lg = loss_and_grads(model, batch, cfg.dropout_keep, rng);
    if (cfg.grad_clip > 0.0) {
      double norm2 = 0.0;
      for (double g : lg.grads) norm2 += g * g;
      const double norm = std::sqrt(norm2);
      if (norm > cfg.grad_clip) {
        const double s = cfg.grad_clip / norm;
        for (double& g : lg.grads) g *= s;
      }
    }
    adam_step(opt, model.params(), lg.grads, lr, cfg.adam);
    lr *= decay;
    running += lg.mse;
    ++running_count;

    if (iter % cfg.log_interval == 0 || iter == cfg.max_iters) {
      const EvalResult ev = evaluate(model, data, val_idx);
      result.history.push_back({iter, running / running_count, ev.mse, ev.nmse});
      if (on_record) on_record(result.history.back());
      running = 0.0;
      running_count = 0;
    }
  }
  return result;
}

}  // namespace flexff::nn
