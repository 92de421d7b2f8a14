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

#include "flexff/harness/experiment.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include "flexff/common/error.hpp"
#include "flexff/common/rng.hpp"
#include "flexff/control/feedback.hpp"
#include "flexff/data/dataset.hpp"
#include "flexff/harness/cartesian.hpp"
#include "flexff/ilc/ilc.hpp"
#include "flexff/nn/checkpoint.hpp"
#include "flexff/teleop/replay.hpp"

namespace flexff::harness {
namespace {

using nlohmann::json;
using ModelPtr = std::shared_ptr<const nn::RecurrentModel>;

std::vector<std::string> joint_rows(int n) {
  std::vector<std::string> rows;
  for (int i = 1; i <= n; ++i) rows.push_back("joint" + std::to_string(i));
  return rows;
}

const nn::RecurrentModel& need(const ModelPtr& model, const char* which) {
  require(model != nullptr, "missing_checkpoint", std::string("experiment needs the ") + which + " model");
  return *model;
}

ilc::IlcConfig with_limits(ilc::IlcConfig cfg, const PlantConfig& plant) {
  if (cfg.joint_limits_lo.size() == 0) cfg.joint_limits_lo = plant.joint_limits_lo;
  if (cfg.joint_limits_hi.size() == 0) cfg.joint_limits_hi = plant.joint_limits_hi;
  return cfg;
}

json ilc_json(const ilc::IlcState& s) {
  return {{"iterations", s.iter}, {"stop", ilc::to_string(s.stop)}, {"error_history", s.error_history}};
}

// Baseline, both approaches and the optional plant-side ILC rows on one
// desired joint trajectory.
MetricsTable track(const ExperimentSpec& spec, const Trajectory& q_d, const ModelPtr& forward,
                   const ModelPtr& inverse, ExperimentResult& result) {
  const PlantConfig& plant = spec.plant;
  const Profile& profile = spec.profile;
  control::ControllerConfig base = profile.controller;
  base.mode = control::ControlMode::kBaseline;
  control::ControllerConfig ff = profile.controller;
  ff.mode = control::ControlMode::kFeedforward;

  MetricsTable table{"joint", "rad", joint_rows(plant.n_joints), {}};
  const auto add = [&](const std::string& name, const Trajectory& q) {
    table.controllers.push_back({name, compute_metrics(q, q_d)});
    result.series.push_back({"q_" + name, q.data});
  };
  result.series.push_back({"q_d", q_d.data});

  add("baseline", control::run_closed_loop(plant, q_d, std::nullopt, base).q);

  Trajectory u1 = q_d, u2 = q_d;
  if (!spec.identity_feedforward) {
    const ilc::IlcState st = ilc::ilc_refine(need(forward, "forward"), q_d, with_limits(profile.ilc, plant));
    result.report.details["ilc"] = ilc_json(st);
    u1 = st.u;
    u2 = control::filter_trajectory(need(inverse, "inverse"), q_d);
  }
  add("approach1", control::run_closed_loop(plant, q_d, u1, ff).q);
  add("approach2", control::run_closed_loop(plant, q_d, u2, ff).q);
  result.series.push_back({"q_f_approach1", u1.data});
  result.series.push_back({"q_f_approach2", u2.data});

  if (!spec.identity_feedforward && profile.plant_ilc.max_iters > 0) {
    const ilc::IlcConfig cfg = with_limits(profile.plant_ilc, plant);
    const std::pair<const char*, const Trajectory*> starts[] = {{"approach1", &u1}, {"approach2", &u2}};
    for (const auto& [name, u0] : starts) {
      const ilc::IlcState st = ilc::ilc_on_plant(plant, need(forward, "forward"), q_d, *u0, cfg);
      result.report.details[std::string("plant_ilc_") + name] = ilc_json(st);
      add(std::string(name) + "_plant_ilc", control::run_closed_loop(plant, q_d, st.u, ff).q);
    }
  }
  return table;
}

void run_square(const ExperimentSpec& spec, const ModelPtr& forward, const ModelPtr& inverse,
                ExperimentResult& result) {
  SquareSpec square = spec.profile.square;
  require(std::abs(square.rate * spec.plant.dt - 1.0) < 1e-12, "invalid_config",
          "square rate must equal the plant sample rate");
  const SquareReference ref = cartesian_square_reference(spec.plant, square);
  result.report.details["reference"] = {{"max_position_deviation_m", ref.max_position_deviation},
                                        {"max_orientation_deviation_rad", ref.max_orientation_deviation},
                                        {"samples", ref.q_d.length()}};
  MetricsTable joints = track(spec, ref.q_d, forward, inverse, result);

  const KinematicChain& chain = spec.plant.kinematic_params;
  const Eigen::MatrixXd xyz_d = cartesian_positions(chain, ref.q_d);
  MetricsTable cart{"cartesian", "m", {"x", "y", "z"}, {}};
  std::vector<Series> xyz_series;
  for (const ControllerMetrics& c : joints.controllers) {
    for (const Series& s : result.series) {
      if (s.name != "q_" + c.controller) continue;
      Eigen::MatrixXd xyz = cartesian_positions(chain, Trajectory(s.data, ref.q_d.sample_rate));
      cart.controllers.push_back({c.controller, compute_metrics(xyz, xyz_d)});
      xyz_series.push_back({"xyz_" + c.controller, std::move(xyz)});
    }
  }
  for (Series& s : xyz_series) result.series.push_back(std::move(s));
  result.series.push_back({"xyz_d", xyz_d});
  result.report.tables.push_back(std::move(joints));
  result.report.tables.push_back(std::move(cart));
}

void run_teleop(const ExperimentSpec& spec, const ModelPtr& inverse, ExperimentResult& result) {
  const Profile& profile = spec.profile;
  teleop::CommandLog log;
  if (spec.teleop_log.empty()) {
    teleop::SynthSpec synth = profile.teleop_log;
    synth.seed = derive_seed(spec.seed, kHeldOutIndex + 2);
    synth.rate_hz = 1.0 / spec.plant.dt;
    log = teleop::synthesize_command_log(synth);
  } else {
    log = teleop::load_command_log(spec.teleop_log);
  }
  teleop::SessionConfig cfg;
  cfg.plant = spec.plant;
  cfg.q_start = profile.teleop_start;
  cfg.controller = profile.controller;
  cfg.rate_hz = 1.0 / spec.plant.dt;
  cfg.window_T = profile.window;

  // Without a model the "approach" run is the baseline itself.
  const ModelPtr model = spec.identity_feedforward ? nullptr : inverse;
  if (!spec.identity_feedforward) need(inverse, "inverse");
  const teleop::ReplayResult off = teleop::replay(cfg, model, log, teleop::CompOverride::kForceOff);
  const teleop::ReplayResult on =
      teleop::replay(cfg, model, log, model ? teleop::CompOverride::kForceOn : teleop::CompOverride::kForceOff);

  const auto stack = [&](const teleop::ReplayResult& r, bool reference) {
    Eigen::MatrixXd m(spec.plant.n_joints, static_cast<Eigen::Index>(r.states.size()));
    for (std::size_t i = 0; i < r.states.size(); ++i)
      m.col(static_cast<Eigen::Index>(i)) = reference ? r.states[i].q_d : r.states[i].q;
    return m;
  };
  MetricsTable table{"joint", "rad", joint_rows(spec.plant.n_joints), {}};
  table.controllers.push_back({"baseline", compute_metrics(stack(off, false), stack(off, true))});
  table.controllers.push_back({"approach2", compute_metrics(stack(on, false), stack(on, true))});
  result.series.push_back({"q_d", stack(on, true)});
  result.series.push_back({"q_baseline", stack(off, false)});
  result.series.push_back({"q_approach2", stack(on, false)});
  result.report.details["ticks"] = log.n_ticks;
  result.report.details["messages"] = log.messages.size();
  result.report.details["latency_samples"] = on.states.empty() ? 0 : on.states.back().latency_samples;
  result.report.details["session_errors"] = on.errors.size() + off.errors.size();
  result.report.tables.push_back(std::move(table));
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSinusoid:
      return "sinusoid";
    case ExperimentKind::kRandom:
      return "random";
    case ExperimentKind::kCartesianSquare:
      return "cartesian_square";
    case ExperimentKind::kTeleopReplay:
      return "teleop_replay";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (ExperimentKind k : all_experiments())
    if (to_string(k) == name) return k;
  throw Error("invalid_argument",
              "unknown experiment '" + name + "' (expected sinusoid, random, cartesian_square or teleop_replay)");
}

const std::vector<ExperimentKind>& all_experiments() {
  static const std::vector<ExperimentKind> kinds = {ExperimentKind::kSinusoid, ExperimentKind::kRandom,
                                                    ExperimentKind::kCartesianSquare,
                                                    ExperimentKind::kTeleopReplay};
  return kinds;
}

Trajectory held_out_trajectory(ExperimentKind kind, const PlantConfig& plant, const Profile& profile,
                               std::uint64_t seed) {
  data::CampaignSpec spec = profile.campaign;
  spec.samples_per_traj = profile.test_samples;
  spec.sample_rate = 1.0 / plant.dt;
  switch (kind) {
    case ExperimentKind::kSinusoid:
      return data::gen_sinusoid(spec, plant, derive_seed(seed, kHeldOutIndex));
    case ExperimentKind::kRandom:
      return data::gen_random(spec, plant, derive_seed(seed, kHeldOutIndex + 1));
    default:
      break;
  }
  throw Error("invalid_argument", "held-out trajectories exist for sinusoid and random experiments only");
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const auto load = [](const std::filesystem::path& path) -> ModelPtr {
    if (path.empty()) return nullptr;
    require(std::filesystem::exists(path), "missing_checkpoint", "checkpoint not found: " + path.string());
    return std::make_shared<const nn::RecurrentModel>(nn::read_checkpoint(path));
  };
  ModelPtr forward, inverse;
  if (!spec.identity_feedforward) {
    if (spec.kind != ExperimentKind::kTeleopReplay) {
      require(!spec.forward_checkpoint.empty(), "missing_checkpoint", "no forward checkpoint given");
      forward = load(spec.forward_checkpoint);
    }
    require(!spec.inverse_checkpoint.empty(), "missing_checkpoint", "no inverse checkpoint given");
    inverse = load(spec.inverse_checkpoint);
  }
  return run_experiment(spec, forward, inverse);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, ModelPtr forward, ModelPtr inverse) {
  validate(spec.plant);
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.report.experiment = to_string(spec.kind);
  result.report.seed = spec.seed;
  for (const ModelPtr& m : {forward, inverse}) {
    if (!m) continue;
    require(m->topology().n_joints == spec.plant.n_joints, "invalid_model",
            "model joint count does not match the plant");
  }
  if (forward) {
    require(forward->topology().direction == nn::Direction::kUnidirectional, "invalid_model",
            "forward model must be unidirectional");
  }
  if (inverse) {
    require(inverse->topology().direction == nn::Direction::kBidirectional, "invalid_model",
            "inverse model must be bidirectional");
  }

  switch (spec.kind) {
    case ExperimentKind::kSinusoid:
    case ExperimentKind::kRandom: {
      const Trajectory q_d = held_out_trajectory(spec.kind, spec.plant, spec.profile, spec.seed);
      result.report.tables.push_back(track(spec, q_d, forward, inverse, result));
      break;
    }
    case ExperimentKind::kCartesianSquare:
      run_square(spec, forward, inverse, result);
      break;
    case ExperimentKind::kTeleopReplay:
      run_teleop(spec, inverse, result);
      break;
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!spec.out_dir.empty()) write_experiment_outputs(result, spec.out_dir);
  return result;
}

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  const std::string stem = result.report.experiment;
  emit_report(result.report, ReportFormat::kJson, dir / (stem + ".json"));
  emit_report(result.report, ReportFormat::kCsv, dir / (stem + ".csv"));
  emit_report(result.report, ReportFormat::kMarkdown, dir / (stem + ".md"));
  std::ofstream out(dir / (stem + "_series.csv"));
  require(static_cast<bool>(out), "io_error", "cannot write " + (dir / (stem + "_series.csv")).string());
  out << "series,t,row,value\n" << std::setprecision(17);
  for (const Series& s : result.series)
    for (Eigen::Index t = 0; t < s.data.cols(); ++t)
      for (Eigen::Index r = 0; r < s.data.rows(); ++r) out << s.name << ',' << t << ',' << r + 1 << ',' << s.data(r, t) << '\n';
  require(static_cast<bool>(out), "io_error", "failed writing series for " + stem);
}

}  // namespace flexff::harness
