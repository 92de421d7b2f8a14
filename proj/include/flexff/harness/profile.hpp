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
#include <string>

#include <json.hpp>

#include "flexff/control/feedback.hpp"
#include "flexff/data/dataset.hpp"
#include "flexff/harness/cartesian.hpp"
#include "flexff/ilc/ilc.hpp"
#include "flexff/nn/train.hpp"
#include "flexff/teleop/replay.hpp"

namespace flexff::harness {

struct ModelShape {
  int hidden = 64;
  int layers = 4;
  bool operator==(const ModelShape&) const = default;
};

// Every knob of the collect → train → refine → evaluate pipeline.
struct Profile {
  std::string name = "desk";
  data::CampaignSpec campaign;
  int window = 50;
  ModelShape forward{64, 4};
  ModelShape inverse{64, 2};
  bool input_skip = true;
  nn::TrainConfig train_forward;
  nn::TrainConfig train_inverse;
  ilc::IlcConfig ilc;
  // Additional iterations against the plant itself; 0 skips them.
  ilc::IlcConfig plant_ilc;
  control::ControllerConfig controller;
  // Held-out trajectories: length of the sinusoid/random test trajectories
  // and number of trajectories in the fidelity check.
  int test_samples = 1000;
  int fidelity_trajectories = 10;
  SquareSpec square;
  teleop::SynthSpec teleop_log;
  // Teleop start pose; empty uses the session default.
  Eigen::VectorXd teleop_start;
};

// 50 × 500-sample campaign and small networks; minutes on one core.
Profile desk_profile();
// Full scale: 500 × 2500 samples, 4 × 64 forward and 2 × 64 bidirectional
// inverse networks, dropout keep 0.5. Hours on one core.
Profile paper_profile();
// "desk" or "paper"; anything else throws Error("invalid_config").
Profile profile_by_name(const std::string& name);

nlohmann::json to_json(const Profile& profile);
// Keys absent from the document keep the values of `base`.
Profile profile_from_json(const nlohmann::json& doc, Profile base);

nn::Topology forward_topology(const Profile& profile, int n_joints);
nn::Topology inverse_topology(const Profile& profile, int n_joints);

}  // namespace flexff::harness
