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
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "flexff/nn/adam.hpp"
#include "flexff/nn/model.hpp"

namespace flexff::nn {

// Windows referenced into shared source sequences instead of being copied;
// a full-scale campaign has over a million overlapping windows.
struct WindowSet {
  struct Ref {
    std::uint32_t sequence;
    std::uint32_t start;   // first input column
    std::uint32_t target;  // target column in the target sequence
  };

  int window = 0;
  std::vector<Eigen::MatrixXd> inputs;   // n × N per sequence
  std::vector<Eigen::MatrixXd> targets;  // n × N per sequence
  std::vector<Ref> refs;

  std::size_t size() const { return refs.size(); }
  WindowSample sample(std::size_t i) const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  // Learning rate decays exponentially to learning_rate * final_lr_fraction.
  double final_lr_fraction = 1.0;
  int batch_size = 256;
  double dropout_keep = 0.5;
  int max_iters = 10000;
  std::uint64_t rng_seed = 0;
  AdamHyper adam;
  double validation_fraction = 0.2;
  int log_interval = 100;
  // Cap on validation windows evaluated at each log point.
  int validation_max_samples = 2048;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  // Fit the input/output normaliser from the training split before training.
  bool fit_normalizer = true;
};

void validate(const TrainConfig& config);

struct TrainRecord {
  int iter = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  // Validation MSE per joint divided by that joint's target variance, averaged.
  double val_nmse = 0.0;

  bool operator==(const TrainRecord&) const = default;
};

struct TrainResult {
  RecurrentModel model;
  std::vector<TrainRecord> history;
};

// Shuffles the windows with the run seed, holds out validation_fraction of
// them, and runs max_iters Adam iterations on random training batches.
// on_record, when set, sees every history entry as it is produced.
TrainResult train(const RecurrentModel& model, const WindowSet& data, const TrainConfig& config,
                  const std::function<void(const TrainRecord&)>& on_record = {});

// Held-out metrics on an explicit list of windows.
struct EvalResult {
  double mse = 0.0;
  double nmse = 0.0;
};
EvalResult evaluate(const RecurrentModel& model, const WindowSet& data,
                    const std::vector<std::size_t>& indices);

}  // namespace flexff::nn
