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
#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

#include "flexff/teleop/session.hpp"

namespace flexff::teleop {

// A recorded session: each message is delivered just before the tick it is
// stamped with. Stored as JSON lines {"tick": k, "msg": {...}}.
struct LoggedMessage {
  std::uint64_t tick = 0;
  ClientMessage msg;
  bool operator==(const LoggedMessage&) const = default;
};

struct CommandLog {
  std::vector<LoggedMessage> messages;
  // Total ticks of the session; at least one past the last message.
  std::uint64_t n_ticks = 0;
  bool operator==(const CommandLog&) const = default;
};

// The header line {"n_ticks": N} precedes the messages.
void write_command_log(std::ostream& out, const CommandLog& log);
CommandLog read_command_log(std::istream& in);
void save_command_log(const std::filesystem::path& path, const CommandLog& log);
CommandLog load_command_log(const std::filesystem::path& path);

enum class CompOverride { kAsLogged, kForceOn, kForceOff };

struct ReplayResult {
  SessionInfo info;
  std::vector<StateMsg> states;
  std::vector<std::pair<std::uint64_t, ErrorMsg>> errors;  // tick, error
  double mean_tick_seconds = 0.0;
};

// Runs a fresh session over the log. With an override, toggle_comp messages
// are dropped and compensation is pinned on or off for the whole run.
ReplayResult replay(const SessionConfig& config, std::shared_ptr<const nn::RecurrentModel> inverse,
                    const CommandLog& log, CompOverride comp = CompOverride::kAsLogged);

// Joystick-like session: strokes along random Cartesian directions, each
// followed by a release and the reverse stroke so the arm returns near its
// start. Commands are sent at command_rate_hz with increasing seq and the
// orientation lock is switched on at tick 0.
struct SynthSpec {
  std::uint64_t seed = 0;
  double duration_s = 30.0;
  double rate_hz = 100.0;
  double command_rate_hz = 50.0;
  double min_speed = 0.04;  // m/s
  double max_speed = 0.1;
  double min_stroke_s = 0.6;
  double max_stroke_s = 1.5;
  double ramp_s = 0.2;
};

CommandLog synthesize_command_log(const SynthSpec& spec);

}  // namespace flexff::teleop
