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

#include "flexff/harness/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "flexff/common/error.hpp"
#include "flexff/common/rng.hpp"
#include "flexff/nn/checkpoint.hpp"
#include "flexff/sim/config_io.hpp"

namespace flexff::harness {
namespace {

// Stream indices for seeds derived from the run seed. Campaign trajectories
// use indices [0, n_total) and held-out trajectories start at kHeldOutIndex.
constexpr std::uint64_t kModelIndex = kHeldOutIndex - 16;
constexpr std::uint64_t kFidelityIndex = kHeldOutIndex + 64;

double since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), "io_error", "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), "io_error", "failed writing " + path.string());
}

}  // namespace

data::Dataset collect_dataset(const PlantConfig& plant, const Profile& profile, std::uint64_t seed, int threads) {
  data::Dataset ds;
  ds.spec = profile.campaign;
  ds.spec.rng_seed = seed;
  ds.spec.sample_rate = 1.0 / plant.dt;
  ds.plant = to_json(plant);
  ds.plant_hash = plant_config_hash(plant);
  ds.pairs = data::collect_campaign(plant, ds.spec, threads);
  return ds;
}

std::string to_string(ModelRole role) { return role == ModelRole::kForward ? "forward" : "inverse"; }

nn::TrainResult train_model(const data::Dataset& dataset, const Profile& profile, ModelRole role,
                            std::uint64_t seed, const std::function<void(const nn::TrainRecord&)>& on_record) {
  require(!dataset.pairs.empty(), "dataset_too_small", "dataset has no trajectories");
  const auto n = static_cast<int>(dataset.pairs.front().q_d.n_joints());
  const bool fwd = role == ModelRole::kForward;
  const nn::Topology topo = fwd ? forward_topology(profile, n) : inverse_topology(profile, n);
  nn::TrainConfig cfg = fwd ? profile.train_forward : profile.train_inverse;
  const std::uint64_t base = kModelIndex + (fwd ? 0 : 2);
  cfg.rng_seed = derive_seed(seed, base + 1);
  const nn::WindowSet windows =
      fwd ? data::forward_window_set(dataset.pairs, topo.window) : data::inverse_window_set(dataset.pairs, topo.window);
  return nn::train(nn::RecurrentModel::random(topo, derive_seed(seed, base)), windows, cfg, on_record);
}

nlohmann::json history_json(const std::vector<nn::TrainRecord>& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const nn::TrainRecord& r : history) {
    out.push_back({{"iter", r.iter}, {"train_mse", r.train_mse}, {"val_mse", r.val_mse}, {"val_nmse", r.val_nmse}});
  }
  return out;
}

nn::EvalResult held_out_fidelity(const nn::RecurrentModel& model, const PlantConfig& plant, const Profile& profile,
                                 std::uint64_t seed) {
  data::CampaignSpec spec = profile.campaign;
  spec.sample_rate = 1.0 / plant.dt;
  std::vector<data::TrajectoryPair> pairs;
  for (int i = 0; i < profile.fidelity_trajectories; ++i) {
    const std::uint64_t s = derive_seed(seed, kFidelityIndex + static_cast<std::uint64_t>(i));
    data::TrajectoryPair p;
    p.kind = i % 2 == 0 ? data::TrajectoryKind::kSinusoid : data::TrajectoryKind::kRandom;
    p.q_d = p.kind == data::TrajectoryKind::kSinusoid ? data::gen_sinusoid(spec, plant, s)
                                                      : data::gen_random(spec, plant, s);
    p.q = simulate(plant, p.q_d);
    pairs.push_back(std::move(p));
  }
  const int T = model.topology().window;
  const nn::WindowSet windows = model.topology().direction == nn::Direction::kUnidirectional
                                    ? data::forward_window_set(pairs, T)
                                    : data::inverse_window_set(pairs, T);
  std::vector<std::size_t> all(windows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return nn::evaluate(model, windows, all);
}

PipelineResult run_pipeline(const PipelineOptions& opt) {
  const Artifacts art{opt.out_dir};
  const bool write = !opt.out_dir.empty();
  std::map<std::string, double> seconds;
  const auto say = [&](const std::string& line) {
    if (opt.progress) opt.progress(line);
  };
  const auto fmt = [](double v, int digits) {
    std::ostringstream o;
    o << std::setprecision(digits) << v;
    return o.str();
  };
  const auto trainer = [&](ModelRole role) {
    return [&, role](const nn::TrainRecord& r) {
      say(to_string(role) + " iter " + std::to_string(r.iter) + " train_mse " + fmt(r.train_mse, 4) +
          " val_nmse " + fmt(r.val_nmse, 4));
    };
  };

  auto start = std::chrono::steady_clock::now();
  data::Dataset dataset = collect_dataset(opt.plant, opt.profile, opt.seed, opt.threads);
  seconds["collect"] = since(start);
  say("collected " + std::to_string(dataset.pairs.size()) + " trajectories in " + fmt(seconds["collect"], 3) + " s");
  if (write) data::save_dataset(art.dataset(), dataset);

  start = std::chrono::steady_clock::now();
  nn::TrainResult fwd = train_model(dataset, opt.profile, ModelRole::kForward, opt.seed, trainer(ModelRole::kForward));
  seconds["train_forward"] = since(start);
  say("trained forward model in " + fmt(seconds["train_forward"], 3) + " s");
  start = std::chrono::steady_clock::now();
  nn::TrainResult inv = train_model(dataset, opt.profile, ModelRole::kInverse, opt.seed, trainer(ModelRole::kInverse));
  seconds["train_inverse"] = since(start);
  say("trained inverse model in " + fmt(seconds["train_inverse"], 3) + " s");

  const nn::EvalResult fwd_fidelity = held_out_fidelity(fwd.model, opt.plant, opt.profile, opt.seed);
  const nn::EvalResult inv_fidelity = held_out_fidelity(inv.model, opt.plant, opt.profile, opt.seed);
  PipelineResult res{std::move(dataset), std::move(fwd), std::move(inv), fwd_fidelity, inv_fidelity, {},
                     std::move(seconds)};
  if (write) {
    nn::write_checkpoint(res.forward.model, art.forward());
    nn::write_checkpoint(res.inverse.model, art.inverse());
    write_text(art.forward_history(), history_json(res.forward.history).dump(2) + "\n");
    write_text(art.inverse_history(), history_json(res.inverse.history).dump(2) + "\n");
  }

  const auto forward = std::make_shared<const nn::RecurrentModel>(res.forward.model);
  const auto inverse = std::make_shared<const nn::RecurrentModel>(res.inverse.model);
  std::vector<Report> reports;
  for (ExperimentKind kind : opt.experiments) {
    ExperimentSpec spec;
    spec.kind = kind;
    spec.plant = opt.plant;
    spec.profile = opt.profile;
    spec.seed = opt.seed;
    if (write) spec.out_dir = art.reports();
    res.experiments.push_back(run_experiment(spec, forward, inverse));
    res.seconds[to_string(kind)] = res.experiments.back().seconds;
    say(to_string(kind) + " finished in " + fmt(res.experiments.back().seconds, 3) + " s");
    reports.push_back(res.experiments.back().report);
  }

  if (write) {
    std::string summary = summary_markdown(reports);
    summary += "\n## held-out one-step fidelity\n\n| model | mse | normalised mse |\n|---|---:|---:|\n";
    summary += "| forward | " + std::to_string(res.forward_fidelity.mse) + " | " +
               std::to_string(res.forward_fidelity.nmse) + " |\n";
    summary += "| inverse | " + std::to_string(res.inverse_fidelity.mse) + " | " +
               std::to_string(res.inverse_fidelity.nmse) + " |\n";
    write_text(art.dir / "summary.md", summary);
    write_text(art.timings(), nlohmann::json(res.seconds).dump(2) + "\n");
  }
  return res;
}

std::string summary_markdown(const std::vector<Report>& reports) {
  std::string out;
  for (const Report& r : reports) {
    if (!out.empty()) out += "\n";
    out += format_report(r, ReportFormat::kMarkdown);
  }
  return out;
}

}  // namespace flexff::harness
