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

#include "flexff/teleop/protocol.hpp"

#include <cmath>

#include "flexff/common/error.hpp"

namespace flexff::teleop {
namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& detail) { throw Error("malformed_message", detail); }

const json& field(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

bool get_bool(const json& doc, const char* key) {
  const json& v = field(doc, key);
  if (!v.is_boolean()) malformed(std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

json vector_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from(const json& v) {
  const auto values = v.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

ClientMessage client_message_from_json(const json& doc) {
  if (!doc.is_object()) malformed("message must be a JSON object");
  const json& type = field(doc, "type");
  if (!type.is_string()) malformed("field 'type' must be a string");
  const auto kind = type.get<std::string>();
  if (kind == "vel_cmd") {
    VelCmd cmd;
    const json& v = field(doc, "v");
    if (!v.is_array() || v.size() != 6) malformed("vel_cmd.v must be an array of 6 numbers");
    for (std::size_t i = 0; i < 6; ++i) {
      if (!v[i].is_number()) malformed("vel_cmd.v must be an array of 6 numbers");
      cmd.v[i] = v[i].get<double>();
      if (!std::isfinite(cmd.v[i])) malformed("vel_cmd.v must be finite");
    }
    const json& seq = field(doc, "seq");
    if (!seq.is_number_unsigned()) malformed("vel_cmd.seq must be a non-negative integer");
    cmd.seq = seq.get<std::uint64_t>();
    return cmd;
  }
  if (kind == "toggle_comp") return ToggleComp{get_bool(doc, "on")};
  if (kind == "set_orientation_lock") return SetOrientationLock{get_bool(doc, "on")};
  malformed("unknown message type '" + kind + "'");
}

ClientMessage parse_client_message(std::string_view text) {
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) malformed("invalid JSON");
  return client_message_from_json(doc);
}

json to_json(const ClientMessage& msg) {
  struct Visitor {
    json operator()(const VelCmd& c) const {
      return {{"type", "vel_cmd"}, {"v", std::vector<double>(c.v.begin(), c.v.end())}, {"seq", c.seq}};
    }
    json operator()(const ToggleComp& c) const { return {{"type", "toggle_comp"}, {"on", c.on}}; }
    json operator()(const SetOrientationLock& c) const { return {{"type", "set_orientation_lock"}, {"on", c.on}}; }
  };
  return std::visit(Visitor{}, msg);
}

json to_json(const SessionInfo& info) {
  json doc = {{"type", "session_info"}, {"n_joints", info.n_joints}, {"rate_hz", info.rate_hz},
              {"window_T", info.window_T}};
  if (!info.kinematics.is_null()) doc["kinematics"] = info.kinematics;
  return doc;
}

json to_json(const StateMsg& s) {
  return {{"type", "state"},
          {"t", s.t},
          {"q", vector_json(s.q)},
          {"q_d", vector_json(s.q_d)},
          {"q_c", vector_json(s.q_c)},
          {"err_l2_window", s.err_l2_window},
          {"comp_on", s.comp_on},
          {"latency_samples", s.latency_samples}};
}

json to_json(const ErrorMsg& e) { return {{"type", "error"}, {"code", e.code}, {"detail", e.detail}}; }

SessionInfo session_info_from_json(const json& doc) {
  SessionInfo info;
  info.n_joints = doc.at("n_joints").get<int>();
  info.rate_hz = doc.at("rate_hz").get<double>();
  info.window_T = doc.at("window_T").get<int>();
  if (doc.contains("kinematics")) info.kinematics = doc.at("kinematics");
  return info;
}

StateMsg state_from_json(const json& doc) {
  StateMsg s;
  s.t = doc.at("t").get<std::uint64_t>();
  s.q = vector_from(doc.at("q"));
  s.q_d = vector_from(doc.at("q_d"));
  s.q_c = vector_from(doc.at("q_c"));
  s.err_l2_window = doc.at("err_l2_window").get<double>();
  s.comp_on = doc.at("comp_on").get<bool>();
  s.latency_samples = doc.at("latency_samples").get<int>();
  return s;
}

std::string encode(const json& doc) { return doc.dump(); }

}  // namespace flexff::teleop
