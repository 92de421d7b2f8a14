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
#include <optional>
#include <string>
#include <vector>

#include "flexff/nn/model.hpp"

namespace flexff::nn {

// Container layout:
//   "FLXFFCKP"  magic (8 bytes)
//   u32         format version
//   u64         header length
//   header      JSON text: topology and an ordered list of arrays
//               {name, shape [rows, cols], offset} (offset in doubles)
//   payload     little-endian IEEE-754 doubles, each array row-major
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> save_checkpoint(const RecurrentModel& model);

// When `expected` is given the stored topology must match it exactly.
RecurrentModel load_checkpoint(const std::vector<std::uint8_t>& bytes,
                               const std::optional<Topology>& expected = std::nullopt);

void write_checkpoint(const RecurrentModel& model, const std::filesystem::path& path);
RecurrentModel read_checkpoint(const std::filesystem::path& path,
                               const std::optional<Topology>& expected = std::nullopt);

std::string to_string(Direction d);
std::string to_string(CellKind c);

}  // namespace flexff::nn
