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

#include <filesystem>

#include <json.hpp>

#include "flexff/sim/plant.hpp"

namespace flexff {

// JSON keys follow the PlantConfig field names. Per-joint arrays may be given
// as a single number (broadcast to every joint); joint_limits is a list of
// [lo, hi] pairs. Keys absent from the document keep their default values.
nlohmann::json to_json(const PlantConfig& config);
PlantConfig plant_config_from_json(const nlohmann::json& doc, PlantConfig base = PlantConfig::defaults());

nlohmann::json to_json(const KinematicChain& chain);
KinematicChain kinematic_chain_from_json(const nlohmann::json& doc);

// Reads a JSON file. When the document has a "plant" section that section is
// used, otherwise the whole document.
PlantConfig load_plant_config(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

// FNV-1a over the canonical JSON dump; identifies a plant in dataset headers.
std::string plant_config_hash(const PlantConfig& config);

}  // namespace flexff
