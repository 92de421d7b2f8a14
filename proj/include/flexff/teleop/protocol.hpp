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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>
#include <Eigen/Core>

// Wire messages of the /teleop websocket. Every frame is one JSON object with
// a "type" field:
//   client → server  vel_cmd {v: [6], seq}, toggle_comp {on},
//                    set_orientation_lock {on}
//   server → client  session_info {n_joints, rate_hz, window_T},
//                    state {t, q, q_d, q_c, err_l2_window, comp_on,
//                           latency_samples},
//                    error {code, detail}
// The velocity v is [ω; v] (angular first), matching the Jacobian rows.

namespace flexff::teleop {

struct VelCmd {
  std::array<double, 6> v{};
  std::uint64_t seq = 0;
  bool operator==(const VelCmd&) const = default;
};

struct ToggleComp {
  bool on = true;
  bool operator==(const ToggleComp&) const = default;
};

struct SetOrientationLock {
  bool on = true;
  bool operator==(const SetOrientationLock&) const = default;
};

using ClientMessage = std::variant<VelCmd, ToggleComp, SetOrientationLock>;

struct SessionInfo {
  int n_joints = 0;
  double rate_hz = 100.0;
  int window_T = 50;
  // Kinematic chain of the session's arm, for clients that draw it.
  nlohmann::json kinematics;
  bool operator==(const SessionInfo&) const = default;
};

struct StateMsg {
  std::uint64_t t = 0;
  Eigen::VectorXd q, q_d, q_c;
  double err_l2_window = 0.0;
  bool comp_on = false;
  int latency_samples = 0;

  bool operator==(const StateMsg& o) const {
    return t == o.t && q == o.q && q_d == o.q_d && q_c == o.q_c && err_l2_window == o.err_l2_window &&
           comp_on == o.comp_on && latency_samples == o.latency_samples;
  }
};

struct ErrorMsg {
  std::string code;
  std::string detail;
  bool operator==(const ErrorMsg&) const = default;
};

// Throws Error("malformed_message") for anything that is not a well-formed
// client message.
ClientMessage parse_client_message(std::string_view text);
ClientMessage client_message_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ClientMessage& msg);

nlohmann::json to_json(const SessionInfo& info);
nlohmann::json to_json(const StateMsg& state);
nlohmann::json to_json(const ErrorMsg& error);
SessionInfo session_info_from_json(const nlohmann::json& doc);
StateMsg state_from_json(const nlohmann::json& doc);

// Compact single-line JSON text of a message.
std::string encode(const nlohmann::json& doc);

}  // namespace flexff::teleop
