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

#include "flexff/sim/config_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>

namespace flexff {
namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j, int n, const char* key) {
  if (j.is_number()) return Eigen::VectorXd::Constant(n, j.get<double>());
  require(j.is_array(), "invalid_config", std::string(key) + " must be a number or array");
  const auto v = j.get<std::vector<double>>();
  require(static_cast<int>(v.size()) == n, "invalid_config",
          std::string(key) + " must have n_joints entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

Eigen::Vector3d json_vec3(const json& j, const char* key) {
  const auto v = j.get<std::vector<double>>();
  require(v.size() == 3, "invalid_config", std::string(key) + " must have 3 entries");
  return {v[0], v[1], v[2]};
}

}  // namespace

json to_json(const KinematicChain& chain) {
  json joints = json::array();
  for (const auto& j : chain.joints) {
    joints.push_back({{"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
                      {"point", {j.point.x(), j.point.y(), j.point.z()}}});
  }
  const auto& q = chain.home_orientation;
  return {{"joints", joints},
          {"home_position", {chain.home_position.x(), chain.home_position.y(), chain.home_position.z()}},
          {"home_orientation", {q.w(), q.x(), q.y(), q.z()}}};
}

KinematicChain kinematic_chain_from_json(const json& doc) {
  if (doc.is_string()) {
    const auto preset = doc.get<std::string>();
    if (preset == "baxter_like") return KinematicChain::baxter_like();
    throw Error("invalid_config", "unknown kinematic preset '" + preset + "'");
  }
  KinematicChain chain;
  if (doc.contains("planar")) return KinematicChain::planar(doc.at("planar").get<std::vector<double>>());
  for (const auto& j : doc.at("joints")) {
    JointAxis axis{json_vec3(j.at("axis"), "axis").normalized(), json_vec3(j.at("point"), "point")};
    chain.joints.push_back(axis);
  }
  if (doc.contains("home_position")) chain.home_position = json_vec3(doc.at("home_position"), "home_position");
  if (doc.contains("home_orientation")) {
    const auto q = doc.at("home_orientation").get<std::vector<double>>();
    require(q.size() == 4, "invalid_config", "home_orientation must be [w, x, y, z]");
    chain.home_orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
  }
  return chain;
}

json to_json(const PlantConfig& c) {
  json coupling = json::array();
  for (Eigen::Index i = 0; i < c.coupling.rows(); ++i) {
    Eigen::VectorXd row = c.coupling.row(i).transpose();
    coupling.push_back(vec_json(row));
  }
  json limits = json::array();
  for (int i = 0; i < c.n_joints; ++i) limits.push_back({c.joint_limits_lo[i], c.joint_limits_hi[i]});
  return {{"name", c.name},
          {"n_joints", c.n_joints},
          {"dt", c.dt},
          {"substeps", c.substeps},
          {"motor_inertia", vec_json(c.motor_inertia)},
          {"link_inertia", vec_json(c.link_inertia)},
          {"spring_stiffness", vec_json(c.spring_stiffness)},
          {"spring_damping", vec_json(c.spring_damping)},
          {"servo_kp", vec_json(c.servo_kp)},
          {"servo_kd", vec_json(c.servo_kd)},
          {"coupling", coupling},
          {"gravity_gain", vec_json(c.gravity_gain)},
          {"delay_steps", c.delay_steps},
          {"joint_limits", limits},
          {"divergence_bound", c.divergence_bound},
          {"kinematic_params", to_json(c.kinematic_params)}};
}

PlantConfig plant_config_from_json(const json& doc, PlantConfig c) {
  if (doc.contains("n_joints") && doc.at("n_joints").get<int>() != c.n_joints) {
    c = PlantConfig::uniform(doc.at("n_joints").get<int>());
    c.name = "custom";
  }
  const int n = c.n_joints;
  if (doc.contains("name")) c.name = doc.at("name").get<std::string>();
  if (doc.contains("dt")) c.dt = doc.at("dt").get<double>();
  if (doc.contains("substeps")) c.substeps = doc.at("substeps").get<int>();
  const auto opt_vec = [&](const char* key, Eigen::VectorXd& dst) {
    if (doc.contains(key)) dst = json_vec(doc.at(key), n, key);
  };
  opt_vec("motor_inertia", c.motor_inertia);
  opt_vec("link_inertia", c.link_inertia);
  opt_vec("spring_stiffness", c.spring_stiffness);
  opt_vec("spring_damping", c.spring_damping);
  opt_vec("servo_kp", c.servo_kp);
  opt_vec("servo_kd", c.servo_kd);
  opt_vec("gravity_gain", c.gravity_gain);
  if (doc.contains("coupling")) {
    const auto rows = doc.at("coupling").get<std::vector<std::vector<double>>>();
    require(static_cast<int>(rows.size()) == n, "invalid_config", "coupling must have n_joints rows");
    c.coupling.resize(n, n);
    for (int i = 0; i < n; ++i) {
      require(static_cast<int>(rows[i].size()) == n, "invalid_config", "coupling must be square");
      for (int j = 0; j < n; ++j) c.coupling(i, j) = rows[i][j];
    }
  }
  if (doc.contains("delay_steps")) c.delay_steps = doc.at("delay_steps").get<int>();
  if (doc.contains("joint_limits")) {
    const auto lim = doc.at("joint_limits").get<std::vector<std::vector<double>>>();
    require(static_cast<int>(lim.size()) == n, "invalid_config", "joint_limits must have n_joints pairs");
    c.joint_limits_lo.resize(n);
    c.joint_limits_hi.resize(n);
    for (int i = 0; i < n; ++i) {
      require(lim[i].size() == 2, "invalid_config", "joint_limits entries must be [lo, hi]");
      c.joint_limits_lo[i] = lim[i][0];
      c.joint_limits_hi[i] = lim[i][1];
    }
  }
  if (doc.contains("divergence_bound")) c.divergence_bound = doc.at("divergence_bound").get<double>();
  if (doc.contains("kinematic_params")) c.kinematic_params = kinematic_chain_from_json(doc.at("kinematic_params"));
  validate(c);
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "io_error", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("parse_error", path.string() + ": " + e.what());
  }
}

PlantConfig load_plant_config(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  return plant_config_from_json(doc.contains("plant") ? doc.at("plant") : doc);
}

std::string plant_config_hash(const PlantConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace flexff
