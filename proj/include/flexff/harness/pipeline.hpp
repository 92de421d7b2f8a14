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
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "flexff/data/dataset.hpp"
#include "flexff/harness/experiment.hpp"
#include "flexff/nn/train.hpp"

namespace flexff::harness {

// Artifact names inside an output directory.
struct Artifacts {
  std::filesystem::path dir;

  std::filesystem::path dataset() const { return dir / "dataset.bin"; }
  std::filesystem::path forward() const { return dir / "forward.ckpt"; }
  std::filesystem::path inverse() const { return dir / "inverse.ckpt"; }
  std::filesystem::path forward_history() const { return dir / "forward_history.json"; }
  std::filesystem::path inverse_history() const { return dir / "inverse_history.json"; }
  std::filesystem::path reports() const { return dir / "reports"; }
  std::filesystem::path timings() const { return dir / "timings.json"; }
};

// Campaign with rng_seed = seed.
data::Dataset collect_dataset(const PlantConfig& plant, const Profile& profile, std::uint64_t seed, int threads = 1);

enum class ModelRole { kForward, kInverse };
std::string to_string(ModelRole role);

// Initialisation and batch order are derived from seed and role.
nn::TrainResult train_model(const data::Dataset& dataset, const Profile& profile, ModelRole role,
                            std::uint64_t seed, const std::function<void(const nn::TrainRecord&)>& on_record = {});

nlohmann::json history_json(const std::vector<nn::TrainRecord>& history);

// One-step prediction error on trajectories simulated from held-out seeds
// (alternating sinusoid and random).
nn::EvalResult held_out_fidelity(const nn::RecurrentModel& model, const PlantConfig& plant, const Profile& profile,
                                 std::uint64_t seed);

struct PipelineOptions {
  PlantConfig plant = PlantConfig::defaults();
  Profile profile = desk_profile();
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  std::vector<ExperimentKind> experiments = all_experiments();
  int threads = 1;
  // Receives one line per finished stage and training log entry.
  std::function<void(const std::string&)> progress;
};

struct PipelineResult {
  data::Dataset dataset;
  nn::TrainResult forward;
  nn::TrainResult inverse;
  nn::EvalResult forward_fidelity;
  nn::EvalResult inverse_fidelity;
  std::vector<ExperimentResult> experiments;
  std::map<std::string, double> seconds;  // stage → wall time
};

// collect → train both models → refine and evaluate every experiment,
// writing all artifacts and a summary.md under out_dir.
PipelineResult run_pipeline(const PipelineOptions& options);

// Concatenated markdown of several reports.
std::string summary_markdown(const std::vector<Report>& reports);

}  // namespace flexff::harness
