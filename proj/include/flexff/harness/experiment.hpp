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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flexff/harness/profile.hpp"
#include "flexff/harness/report.hpp"
#include "flexff/nn/model.hpp"
#include "flexff/sim/plant.hpp"

namespace flexff::harness {

enum class ExperimentKind { kSinusoid, kRandom, kCartesianSquare, kTeleopReplay };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);
const std::vector<ExperimentKind>& all_experiments();

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::kSinusoid;
  PlantConfig plant = PlantConfig::defaults();
  Profile profile = desk_profile();
  std::filesystem::path forward_checkpoint;
  std::filesystem::path inverse_checkpoint;
  std::uint64_t seed = 0;
  // Directory for the report files and trajectory series; empty writes
  // nothing.
  std::filesystem::path out_dir;
  // Recorded teleop command stream; empty synthesises one from the seed.
  std::filesystem::path teleop_log;
  // Replace every learned feedforward by q_d itself (control experiment).
  bool identity_feedforward = false;
};

// One named signal (n × N) for the CSV series dump.
struct Series {
  std::string name;
  Eigen::MatrixXd data;
};

struct ExperimentResult {
  Report report;
  std::vector<Series> series;
  double seconds = 0.0;
};

// Seeds of held-out trajectories: derive_seed(seed, kHeldOutIndex + k), an
// index range no campaign reaches.
inline constexpr std::uint64_t kHeldOutIndex = std::uint64_t{1} << 40;

// Desired trajectory of a sinusoid or random experiment.
Trajectory held_out_trajectory(ExperimentKind kind, const PlantConfig& plant, const Profile& profile,
                               std::uint64_t seed);

// Loads the checkpoints named by `spec` (Error("missing_checkpoint") when a
// file is absent) and runs the experiment.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Same with models already in memory. Models not needed by the experiment
// may be null.
ExperimentResult run_experiment(const ExperimentSpec& spec, std::shared_ptr<const nn::RecurrentModel> forward,
                                std::shared_ptr<const nn::RecurrentModel> inverse);

// Writes <experiment>.json/.csv/.md and <experiment>_series.csv into dir.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace flexff::harness
