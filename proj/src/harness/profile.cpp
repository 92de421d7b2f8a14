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

#include "flexff/harness/profile.hpp"

#include <vector>

#include "flexff/common/error.hpp"

namespace flexff::harness {
namespace {

using nlohmann::json;

template <typename T>
void read(const json& doc, const char* key, T& value) {
  if (const auto it = doc.find(key); it != doc.end()) value = it->get<T>();
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void read_vector(const json& doc, const char* key, Eigen::VectorXd& value) {
  if (const auto it = doc.find(key); it != doc.end()) {
    const auto v = it->get<std::vector<double>>();
    value = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
}

json to_json(const nn::TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"final_lr_fraction", c.final_lr_fraction},
          {"batch_size", c.batch_size},
          {"dropout_keep", c.dropout_keep},
          {"max_iters", c.max_iters},
          {"rng_seed", c.rng_seed},
          {"adam_beta1", c.adam.beta1},
          {"adam_beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"validation_fraction", c.validation_fraction},
          {"log_interval", c.log_interval},
          {"validation_max_samples", c.validation_max_samples},
          {"grad_clip", c.grad_clip},
          {"fit_normalizer", c.fit_normalizer}};
}

nn::TrainConfig train_from_json(const json& doc, nn::TrainConfig c) {
  read(doc, "learning_rate", c.learning_rate);
  read(doc, "final_lr_fraction", c.final_lr_fraction);
  read(doc, "batch_size", c.batch_size);
  read(doc, "dropout_keep", c.dropout_keep);
  read(doc, "max_iters", c.max_iters);
  read(doc, "rng_seed", c.rng_seed);
  read(doc, "adam_beta1", c.adam.beta1);
  read(doc, "adam_beta2", c.adam.beta2);
  read(doc, "adam_eps", c.adam.eps);
  read(doc, "validation_fraction", c.validation_fraction);
  read(doc, "log_interval", c.log_interval);
  read(doc, "validation_max_samples", c.validation_max_samples);
  read(doc, "grad_clip", c.grad_clip);
  read(doc, "fit_normalizer", c.fit_normalizer);
  return c;
}

json to_json(const ilc::IlcConfig& c) {
  return {{"max_iters", c.max_iters},           {"convergence_tol", c.convergence_tol},
          {"convergence_window", c.convergence_window}, {"grid_min_exp", c.grid_min_exp},
          {"grid_max_exp", c.grid_max_exp},     {"golden_iters", c.golden_iters},
          {"clamp_to_limits", c.clamp_to_limits}};
}

ilc::IlcConfig ilc_from_json(const json& doc, ilc::IlcConfig c) {
  read(doc, "max_iters", c.max_iters);
  read(doc, "convergence_tol", c.convergence_tol);
  read(doc, "convergence_window", c.convergence_window);
  read(doc, "grid_min_exp", c.grid_min_exp);
  read(doc, "grid_max_exp", c.grid_max_exp);
  read(doc, "golden_iters", c.golden_iters);
  read(doc, "clamp_to_limits", c.clamp_to_limits);
  return c;
}

json to_json(const ModelShape& m) { return {{"hidden", m.hidden}, {"layers", m.layers}}; }

ModelShape shape_from_json(const json& doc, ModelShape m) {
  read(doc, "hidden", m.hidden);
  read(doc, "layers", m.layers);
  return m;
}

json to_json(const SquareSpec& s) {
  return {{"side_m", s.side_m},
          {"z_m", s.z_m},
          {"period_s", s.period_s},
          {"rate", s.rate},
          {"center", {s.center.x(), s.center.y()}},
          {"seed", vector_json(s.seed)},
          {"max_joint_velocity", s.max_joint_velocity}};
}

SquareSpec square_from_json(const json& doc, SquareSpec s) {
  read(doc, "side_m", s.side_m);
  read(doc, "z_m", s.z_m);
  read(doc, "period_s", s.period_s);
  read(doc, "rate", s.rate);
  if (const auto it = doc.find("center"); it != doc.end()) {
    const auto c = it->get<std::vector<double>>();
    require(c.size() == 2, "invalid_config", "square.center must have two entries");
    s.center << c[0], c[1];
  }
  read_vector(doc, "seed", s.seed);
  read(doc, "max_joint_velocity", s.max_joint_velocity);
  return s;
}

json to_json(const teleop::SynthSpec& s) {
  return {{"seed", s.seed},           {"duration_s", s.duration_s},     {"rate_hz", s.rate_hz},
          {"command_rate_hz", s.command_rate_hz}, {"min_speed", s.min_speed}, {"max_speed", s.max_speed},
          {"min_stroke_s", s.min_stroke_s}, {"max_stroke_s", s.max_stroke_s}, {"ramp_s", s.ramp_s}};
}

teleop::SynthSpec synth_from_json(const json& doc, teleop::SynthSpec s) {
  read(doc, "seed", s.seed);
  read(doc, "duration_s", s.duration_s);
  read(doc, "rate_hz", s.rate_hz);
  read(doc, "command_rate_hz", s.command_rate_hz);
  read(doc, "min_speed", s.min_speed);
  read(doc, "max_speed", s.max_speed);
  read(doc, "min_stroke_s", s.min_stroke_s);
  read(doc, "max_stroke_s", s.max_stroke_s);
  read(doc, "ramp_s", s.ramp_s);
  return s;
}

}  // namespace

Profile desk_profile() {
  Profile p;
  p.name = "desk";
  p.campaign.n_random = 10;
  p.campaign.n_sinusoid = 40;
  p.campaign.samples_per_traj = 500;
  p.forward = {16, 2};
  p.inverse = {24, 2};
  for (nn::TrainConfig* t : {&p.train_forward, &p.train_inverse}) {
    t->learning_rate = 1e-2;
    t->final_lr_fraction = 0.01;
    t->batch_size = 32;
    t->dropout_keep = 1.0;
    t->max_iters = 16000;
    t->log_interval = 500;
  }
  p.ilc.max_iters = 20;
  p.plant_ilc.max_iters = 5;
  p.teleop_start = Eigen::VectorXd(7);
  p.teleop_start << 0.3, -0.5, -0.4, 1.0, 0.5, 0.9, -0.3;
  p.teleop_log.min_speed = 0.1;
  p.teleop_log.max_speed = 0.25;
  return p;
}

Profile paper_profile() {
  Profile p = desk_profile();
  p.name = "paper";
  p.campaign = data::CampaignSpec{};
  p.forward = {64, 4};
  p.inverse = {64, 2};
  for (nn::TrainConfig* t : {&p.train_forward, &p.train_inverse}) {
    t->learning_rate = 1e-3;
    t->final_lr_fraction = 0.1;
    t->batch_size = 256;
    t->dropout_keep = 0.5;
    t->max_iters = 100000;
    t->log_interval = 1000;
  }
  p.ilc.max_iters = 100;
  p.plant_ilc.max_iters = 10;
  p.test_samples = 2500;
  p.fidelity_trajectories = 20;
  return p;
}

Profile profile_by_name(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  throw Error("invalid_config", "unknown profile '" + name + "' (expected desk or paper)");
}

json to_json(const Profile& p) {
  return {{"name", p.name},
          {"campaign", data::to_json(p.campaign)},
          {"window", p.window},
          {"forward", to_json(p.forward)},
          {"inverse", to_json(p.inverse)},
          {"input_skip", p.input_skip},
          {"train_forward", to_json(p.train_forward)},
          {"train_inverse", to_json(p.train_inverse)},
          {"ilc", to_json(p.ilc)},
          {"plant_ilc", to_json(p.plant_ilc)},
          {"feedback_gain", vector_json(p.controller.k)},
          {"test_samples", p.test_samples},
          {"fidelity_trajectories", p.fidelity_trajectories},
          {"square", to_json(p.square)},
          {"teleop_log", to_json(p.teleop_log)},
          {"teleop_start", vector_json(p.teleop_start)}};
}

Profile profile_from_json(const json& doc, Profile p) {
  require(doc.is_object(), "invalid_config", "profile must be a JSON object");
  try {
    read(doc, "name", p.name);
    if (const auto it = doc.find("campaign"); it != doc.end()) p.campaign = data::campaign_spec_from_json(*it, p.campaign);
    read(doc, "window", p.window);
    if (const auto it = doc.find("forward"); it != doc.end()) p.forward = shape_from_json(*it, p.forward);
    if (const auto it = doc.find("inverse"); it != doc.end()) p.inverse = shape_from_json(*it, p.inverse);
    read(doc, "input_skip", p.input_skip);
    if (const auto it = doc.find("train_forward"); it != doc.end()) p.train_forward = train_from_json(*it, p.train_forward);
    if (const auto it = doc.find("train_inverse"); it != doc.end()) p.train_inverse = train_from_json(*it, p.train_inverse);
    if (const auto it = doc.find("ilc"); it != doc.end()) p.ilc = ilc_from_json(*it, p.ilc);
    if (const auto it = doc.find("plant_ilc"); it != doc.end()) p.plant_ilc = ilc_from_json(*it, p.plant_ilc);
    read_vector(doc, "feedback_gain", p.controller.k);
    read(doc, "test_samples", p.test_samples);
    read(doc, "fidelity_trajectories", p.fidelity_trajectories);
    if (const auto it = doc.find("square"); it != doc.end()) p.square = square_from_json(*it, p.square);
    if (const auto it = doc.find("teleop_log"); it != doc.end()) p.teleop_log = synth_from_json(*it, p.teleop_log);
    read_vector(doc, "teleop_start", p.teleop_start);
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string("profile: ") + e.what());
  }
  require(p.window >= 2 && p.window % 2 == 0, "invalid_config", "window must be even and >= 2");
  require(p.test_samples > p.window, "invalid_config", "test_samples must exceed the window");
  require(p.fidelity_trajectories >= 1, "invalid_config", "fidelity_trajectories must be >= 1");
  return p;
}

nn::Topology forward_topology(const Profile& p, int n_joints) {
  nn::Topology t = nn::forward_topology(n_joints, p.window, p.forward.hidden);
  t.layers = p.forward.layers;
  t.input_skip = p.input_skip;
  return t;
}

nn::Topology inverse_topology(const Profile& p, int n_joints) {
  nn::Topology t = nn::inverse_topology(n_joints, p.window, p.inverse.hidden);
  t.layers = p.inverse.layers;
  t.input_skip = p.input_skip;
  return t;
}

}  // namespace flexff::harness
