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

// flexff command-line driver: data collection, training, ILC refinement,
// evaluation, reporting and the teleoperation service.
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexff/common/error.hpp"
#include "flexff/control/feedback.hpp"
#include "flexff/data/dataset.hpp"
#include "flexff/harness/experiment.hpp"
#include "flexff/harness/metrics.hpp"
#include "flexff/harness/pipeline.hpp"
#include "flexff/ilc/ilc.hpp"
#include "flexff/nn/checkpoint.hpp"
#include "flexff/sim/config_io.hpp"
#include "flexff/teleop/replay.hpp"
#include "flexff/teleop/server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace flexff;

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string profile;
};

// Everything the config file and global flags resolve to.
struct Setup {
  PlantConfig plant = PlantConfig::defaults();
  harness::Profile profile;
  json teleop = json::object();
  harness::Artifacts art;
  std::uint64_t seed = 0;
};

Setup resolve(const Globals& g) {
  Setup s;
  json doc = json::object();
  if (!g.config.empty()) doc = read_json_file(g.config);
  require(doc.is_object(), "invalid_config", "config must be a JSON object");
  if (doc.contains("plant")) s.plant = plant_config_from_json(doc.at("plant"));
  validate(s.plant);
  std::string name = g.profile;
  if (name.empty()) name = doc.contains("profile") ? doc.at("profile").value("name", "desk") : "desk";
  s.profile = harness::profile_by_name(name);
  if (doc.contains("profile")) {
    json overrides = doc.at("profile");
    overrides.erase("name");
    s.profile = harness::profile_from_json(overrides, s.profile);
  }
  if (doc.contains("teleop")) s.teleop = doc.at("teleop");
  s.art.dir = g.out;
  s.seed = g.seed;
  return s;
}

void write_json(const fs::path& path, const json& doc) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), "io_error", "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::shared_ptr<const nn::RecurrentModel> load_model(const fs::path& path) {
  require(fs::exists(path), "missing_checkpoint", "checkpoint not found: " + path.string());
  return std::make_shared<const nn::RecurrentModel>(nn::read_checkpoint(path));
}

data::Dataset load_campaign(const Setup& s) {
  require(fs::exists(s.art.dataset()), "missing_dataset",
          "no dataset at " + s.art.dataset().string() + "; run `flexff collect` first");
  data::Dataset ds = data::load_dataset(s.art.dataset());
  require(ds.plant_hash == plant_config_hash(s.plant), "plant_mismatch",
          "dataset was collected with a different plant configuration");
  return ds;
}

teleop::SessionConfig session_config(const Setup& s) {
  teleop::SessionConfig cfg;
  cfg.plant = s.plant;
  cfg.controller = s.profile.controller;
  cfg.q_start = s.profile.teleop_start;
  cfg.window_T = s.teleop.value("window_T", s.profile.window);
  cfg.rate_hz = s.teleop.value("rate_hz", 1.0 / s.plant.dt);
  require(std::abs(cfg.rate_hz * s.plant.dt - 1.0) < 1e-9, "invalid_config",
          "teleop rate_hz must match the plant sample period");
  cfg.stale_after_s = s.teleop.value("stale_after_s", cfg.stale_after_s);
  cfg.max_joint_velocity = s.teleop.value("max_joint_velocity", cfg.max_joint_velocity);
  cfg.comp_on = s.teleop.value("comp_on", cfg.comp_on);
  return cfg;
}

fs::path teleop_checkpoint(const Setup& s) {
  return s.teleop.contains("checkpoint") ? fs::path(s.teleop.at("checkpoint").get<std::string>())
                                         : s.art.inverse();
}

void print_json(const json& doc) { std::cout << doc.dump(2) << std::endl; }

json fidelity_json(const nn::EvalResult& e) { return {{"mse", e.mse}, {"nmse", e.nmse}}; }

int cmd_collect(const Setup& s, int threads, bool csv) {
  const data::Dataset ds = harness::collect_dataset(s.plant, s.profile, s.seed, threads);
  data::save_dataset(s.art.dataset(), ds);
  if (csv) {
    std::ofstream out(s.art.dir / "dataset.csv");
    require(static_cast<bool>(out), "io_error", "cannot write dataset.csv");
    data::export_csv(ds.pairs, out);
  }
  const int T = s.profile.window;
  std::size_t fwd = 0, inv = 0;
  for (const auto& p : ds.pairs) {
    fwd += data::forward_sample_count(static_cast<std::size_t>(p.q_d.length()), T);
    inv += data::inverse_sample_count(static_cast<std::size_t>(p.q_d.length()), T);
  }
  print_json({{"dataset", s.art.dataset().string()},
              {"trajectories", ds.pairs.size()},
              {"forward_samples", fwd},
              {"inverse_samples", inv}});
  return 0;
}

int cmd_train(const Setup& s, harness::ModelRole role) {
  const data::Dataset ds = load_campaign(s);
  const nn::TrainResult res = harness::train_model(ds, s.profile, role, s.seed, [&](const nn::TrainRecord& r) {
    std::cerr << harness::to_string(role) << " iter " << r.iter << " train_mse " << r.train_mse << " val_nmse "
              << r.val_nmse << std::endl;
  });
  const bool fwd = role == harness::ModelRole::kForward;
  nn::write_checkpoint(res.model, fwd ? s.art.forward() : s.art.inverse());
  write_json(fwd ? s.art.forward_history() : s.art.inverse_history(), harness::history_json(res.history));
  const nn::EvalResult fid = harness::held_out_fidelity(res.model, s.plant, s.profile, s.seed);
  print_json({{"checkpoint", (fwd ? s.art.forward() : s.art.inverse()).string()},
              {"final", res.history.empty() ? json() : harness::history_json({res.history.back()})[0]},
              {"held_out", fidelity_json(fid)}});
  return 0;
}

Trajectory experiment_reference(const Setup& s, harness::ExperimentKind kind) {
  if (kind == harness::ExperimentKind::kCartesianSquare) {
    return harness::cartesian_square_reference(s.plant, s.profile.square).q_d;
  }
  return harness::held_out_trajectory(kind, s.plant, s.profile, s.seed);
}

void write_trajectory_csv(const fs::path& path, const Trajectory& traj) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), "io_error", "cannot write " + path.string());
  out << "t";
  for (Eigen::Index j = 0; j < traj.n_joints(); ++j) out << ",joint" << j + 1;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index t = 0; t < traj.length(); ++t) {
    out << t;
    for (Eigen::Index j = 0; j < traj.n_joints(); ++j) out << ',' << traj.data(j, t);
    out << '\n';
  }
}

int cmd_refine(const Setup& s, const std::string& experiment, int plant_iters) {
  const auto kind = harness::experiment_kind_from_string(experiment);
  require(kind != harness::ExperimentKind::kTeleopReplay, "invalid_argument",
          "teleop_replay has no offline reference to refine");
  const auto forward = load_model(s.art.forward());
  const Trajectory q_d = experiment_reference(s, kind);
  ilc::IlcConfig cfg = s.profile.ilc;
  cfg.joint_limits_lo = s.plant.joint_limits_lo;
  cfg.joint_limits_hi = s.plant.joint_limits_hi;
  ilc::IlcState st = ilc::ilc_refine(*forward, q_d, cfg);
  json out = {{"experiment", experiment},
              {"model", {{"iterations", st.iter}, {"stop", ilc::to_string(st.stop)}, {"error_history", st.error_history}}}};
  if (plant_iters > 0) {
    ilc::IlcConfig pc = cfg;
    pc.max_iters = plant_iters;
    st = ilc::ilc_on_plant(s.plant, *forward, q_d, st.u, pc);
    out["plant"] = {{"iterations", st.iter}, {"stop", ilc::to_string(st.stop)}, {"error_history", st.error_history}};
  }
  const fs::path dir = s.art.dir / "refine";
  write_trajectory_csv(dir / (experiment + "_q_d.csv"), q_d);
  write_trajectory_csv(dir / (experiment + "_u.csv"), st.u);
  write_json(dir / (experiment + "_ilc.json"), out);
  print_json(out);
  return 0;
}

int cmd_evaluate(const Setup& s, const std::vector<std::string>& experiments, bool identity) {
  std::vector<harness::ExperimentKind> kinds;
  for (const auto& e : experiments) kinds.push_back(harness::experiment_kind_from_string(e));
  if (kinds.empty()) kinds = harness::all_experiments();
  json summary = json::array();
  for (auto kind : kinds) {
    harness::ExperimentSpec spec;
    spec.kind = kind;
    spec.plant = s.plant;
    spec.profile = s.profile;
    spec.seed = s.seed;
    spec.forward_checkpoint = s.art.forward();
    spec.inverse_checkpoint = s.art.inverse();
    spec.out_dir = s.art.reports();
    spec.identity_feedforward = identity;
    const harness::ExperimentResult r = harness::run_experiment(spec);
    json entry = {{"experiment", harness::to_string(kind)}, {"seconds", r.seconds}};
    for (const auto& t : r.report.tables) {
      for (std::size_t i = 1; i < t.controllers.size(); ++i) {
        entry["mean_improvement_pct"][t.name][t.controllers[i].controller] =
            harness::mean_improvement(t.controllers.front().metrics, t.controllers[i].metrics);
      }
    }
    summary.push_back(entry);
  }
  print_json(summary);
  return 0;
}

int cmd_report(const Setup& s, const std::string& format) {
  const fs::path dir = s.art.reports();
  require(fs::is_directory(dir), "missing_reports", "no reports in " + dir.string() + "; run `flexff evaluate`");
  std::vector<harness::Report> reports;
  for (auto kind : harness::all_experiments()) {
    const fs::path p = dir / (harness::to_string(kind) + ".json");
    if (fs::exists(p)) reports.push_back(harness::report_from_json(read_json_file(p)));
  }
  require(!reports.empty(), "missing_reports", "no reports in " + dir.string());
  const auto fmt = harness::report_format_from_string(format);
  std::string text;
  if (fmt == harness::ReportFormat::kMarkdown) {
    text = harness::summary_markdown(reports);
  } else {
    for (const auto& r : reports) text += harness::format_report(r, fmt);
  }
  std::cout << text;
  return 0;
}

int cmd_pipeline(const Setup& s, int threads) {
  harness::PipelineOptions opt;
  opt.plant = s.plant;
  opt.profile = s.profile;
  opt.seed = s.seed;
  opt.out_dir = s.art.dir;
  opt.threads = threads;
  opt.progress = [](const std::string& line) { std::cerr << line << std::endl; };
  const harness::PipelineResult res = harness::run_pipeline(opt);
  json out = {{"forward_fidelity", fidelity_json(res.forward_fidelity)},
              {"inverse_fidelity", fidelity_json(res.inverse_fidelity)},
              {"seconds", res.seconds}};
  for (const auto& e : res.experiments) {
    for (const auto& t : e.report.tables) {
      for (std::size_t i = 1; i < t.controllers.size(); ++i) {
        out["mean_improvement_pct"][e.report.experiment][t.name][t.controllers[i].controller] =
            harness::mean_improvement(t.controllers.front().metrics, t.controllers[i].metrics);
      }
    }
  }
  print_json(out);
  return 0;
}

int cmd_serve(const Setup& s, std::optional<int> port, const std::string& host, const std::string& record) {
  teleop::ServerConfig cfg;
  cfg.session = session_config(s);
  cfg.host = host.empty() ? s.teleop.value("host", cfg.host) : host;
  cfg.port = static_cast<unsigned short>(port ? *port : s.teleop.value("port", 8080));
  cfg.record_dir = record.empty() ? fs::path(s.teleop.value("record_dir", std::string())) : fs::path(record);
  // Refuse to start without a loadable compensator.
  const auto model = load_model(teleop_checkpoint(s));
  teleop::serve_until_signal(cfg, model);
  return 0;
}

int cmd_replay(const Setup& s, const std::string& log_path, const std::string& comp, const std::string& telemetry) {
  const teleop::CommandLog log = teleop::load_command_log(log_path);
  teleop::CompOverride mode = teleop::CompOverride::kAsLogged;
  if (comp == "on") {
    mode = teleop::CompOverride::kForceOn;
  } else if (comp == "off") {
    mode = teleop::CompOverride::kForceOff;
  } else {
    require(comp == "as_logged", "invalid_argument", "--comp must be as_logged, on or off");
  }
  const auto model = load_model(teleop_checkpoint(s));
  const teleop::ReplayResult r = teleop::replay(session_config(s), model, log, mode);
  const fs::path out_path = telemetry.empty() ? s.art.dir / "telemetry.jsonl" : fs::path(telemetry);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  std::ofstream out(out_path);
  require(static_cast<bool>(out), "io_error", "cannot write " + out_path.string());
  out << teleop::encode(teleop::to_json(r.info)) << '\n';
  std::size_t next_error = 0;
  for (const auto& st : r.states) {
    for (; next_error < r.errors.size() && r.errors[next_error].first == st.t; ++next_error)
      out << teleop::encode(teleop::to_json(r.errors[next_error].second)) << '\n';
    out << teleop::encode(teleop::to_json(st)) << '\n';
  }
  Eigen::MatrixXd q(r.info.n_joints, static_cast<Eigen::Index>(r.states.size())), q_d = q;
  for (std::size_t i = 0; i < r.states.size(); ++i) {
    q.col(static_cast<Eigen::Index>(i)) = r.states[i].q;
    q_d.col(static_cast<Eigen::Index>(i)) = r.states[i].q_d;
  }
  const harness::Metrics m = harness::compute_metrics(q, q_d);
  print_json({{"telemetry", out_path.string()},
              {"ticks", r.states.size()},
              {"errors", r.errors.size()},
              {"mean_tick_ms", r.mean_tick_seconds * 1e3},
              {"l2", std::vector<double>(m.l2.data(), m.l2.data() + m.l2.size())},
              {"linf", std::vector<double>(m.linf.data(), m.linf.data() + m.linf.size())}});
  return 0;
}

int cmd_synth_log(const Setup& s, const std::string& path) {
  teleop::SynthSpec spec = s.profile.teleop_log;
  spec.seed = s.seed;
  spec.rate_hz = 1.0 / s.plant.dt;
  const teleop::CommandLog log = teleop::synthesize_command_log(spec);
  teleop::save_command_log(path, log);
  print_json({{"log", path}, {"ticks", log.n_ticks}, {"messages", log.messages.size()}});
  return 0;
}

void print_error(const std::string& code, const std::string& detail) {
  std::cerr << json{{"error", {{"code", code}, {"detail", detail}}}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flexff: learned feedforward compensation for a simulated flexible-joint arm"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON config with optional plant, profile and teleop sections");
  app.add_option("--seed", g.seed, "Run seed (campaign, initialisation, held-out trajectories)");
  app.add_option("--out", g.out, "Artifact directory")->capture_default_str();
  app.add_option("--profile", g.profile, "Scale profile")->check(CLI::IsMember({"desk", "paper"}));

  int threads = 1;
  bool csv = false;
  auto* collect = app.add_subcommand("collect", "Simulate the data-collection campaign");
  collect->add_option("--threads", threads, "Worker threads (0 = all cores)");
  collect->add_flag("--csv", csv, "Also export dataset.csv");

  auto* train_fwd = app.add_subcommand("train-forward", "Train the forward (plant) model");
  auto* train_inv = app.add_subcommand("train-inverse", "Train the bidirectional inverse model");

  std::string experiment = "sinusoid";
  int plant_iters = 0;
  auto* refine = app.add_subcommand("refine", "ILC refinement of one experiment's reference on the forward model");
  refine->add_option("--experiment", experiment, "sinusoid | random | cartesian_square")->capture_default_str();
  refine->add_option("--plant-iters", plant_iters, "Additional ILC iterations against the plant");

  std::vector<std::string> experiments;
  bool identity = false;
  auto* evaluate = app.add_subcommand("evaluate", "Run experiments and write reports");
  evaluate->add_option("--experiment", experiments, "Experiments to run (default: all)");
  evaluate->add_flag("--identity-feedforward", identity, "Use q_f = q_d for every approach (control run)");

  std::string format = "markdown";
  auto* report = app.add_subcommand("report", "Print the stored reports");
  report->add_option("--format", format, "markdown | csv | json")->capture_default_str();

  auto* pipeline = app.add_subcommand("pipeline", "collect, train, refine and evaluate in one go");
  pipeline->add_option("--threads", threads, "Collection threads");

  std::optional<int> port;
  std::string host, record;
  auto* serve = app.add_subcommand("serve", "Run the teleoperation service");
  serve->add_option("--port", port, "TCP port (default from config, else 8080)");
  serve->add_option("--host", host, "Listen address (default 127.0.0.1)");
  serve->add_option("--record", record, "Directory for per-session command logs");

  std::string log_path, comp = "as_logged", telemetry;
  auto* replay = app.add_subcommand("replay", "Replay a recorded command log headlessly");
  replay->add_option("--log", log_path, "Command log (JSON lines)")->required();
  replay->add_option("--comp", comp, "as_logged | on | off")->capture_default_str();
  replay->add_option("--telemetry", telemetry, "Output JSON-lines telemetry (default <out>/telemetry.jsonl)");

  std::string synth_path;
  auto* synth = app.add_subcommand("synth-log", "Write a synthetic joystick command log");
  synth->add_option("path", synth_path, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    const Setup s = resolve(g);
    if (*collect) return cmd_collect(s, threads, csv);
    if (*train_fwd) return cmd_train(s, harness::ModelRole::kForward);
    if (*train_inv) return cmd_train(s, harness::ModelRole::kInverse);
    if (*refine) return cmd_refine(s, experiment, plant_iters);
    if (*evaluate) return cmd_evaluate(s, experiments, identity);
    if (*report) return cmd_report(s, format);
    if (*pipeline) return cmd_pipeline(s, threads);
    if (*serve) return cmd_serve(s, port, host, record);
    if (*replay) return cmd_replay(s, log_path, comp, telemetry);
    if (*synth) return cmd_synth_log(s, synth_path);
  } catch (const Error& e) {
    print_error(e.code(), e.detail());
    return 1;
  } catch (const json::exception& e) {
    print_error("invalid_json", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
