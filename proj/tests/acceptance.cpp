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

// Acceptance suite: one PASS/FAIL line per headline criterion. The desk
// pipeline (collect, train, refine, evaluate) runs once and feeds the
// criteria that need trained models.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "flexff/common/error.hpp"
#include "flexff/control/feedback.hpp"
#include "flexff/control/qp.hpp"
#include "flexff/data/dataset.hpp"
#include "flexff/harness/experiment.hpp"
#include "flexff/harness/pipeline.hpp"
#include "flexff/ilc/ilc.hpp"
#include "flexff/nn/checkpoint.hpp"
#include "flexff/nn/train.hpp"
#include "nn_oracles.hpp"
#include "qp_oracle.hpp"
#include "test_util.hpp"

using namespace flexff;
using flexff::testing::barrier_solve;
using flexff::testing::central_diff;
using flexff::testing::random_matrix;
using flexff::testing::rel_err;
using flexff::testing::rollout_map;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o << std::setprecision(digits) << v;
  return o.str();
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2026);
  std::uniform_int_distribution<int> n_d(1, 3), h_d(1, 8), l_d(1, 2), t_d(2, 6);
  double worst_param = 0.0, worst_input = 0.0;
  for (int k = 0; k < 20; ++k) {
    nn::Topology topo;
    topo.direction = k % 2 == 0 ? nn::Direction::kUnidirectional : nn::Direction::kBidirectional;
    topo.n_joints = n_d(rng);
    topo.hidden = h_d(rng);
    topo.layers = l_d(rng);
    topo.window = t_d(rng);
    if (topo.direction == nn::Direction::kBidirectional && topo.window % 2 == 1) ++topo.window;
    topo.input_skip = k % 4 >= 2;
    nn::RecurrentModel m = nn::RecurrentModel::random(topo, 100 + k);
    nn::Normalizer norm = nn::Normalizer::identity(topo.n_joints);
    for (int j = 0; j < topo.n_joints; ++j) {
      norm.in_mean[j] = 0.1 * j;
      norm.in_scale[j] = 1.0 + 0.3 * j;
      norm.out_mean[j] = -0.2 * j;
      norm.out_scale[j] = 0.7 + 0.2 * j;
    }
    m.set_normalizer(norm);

    std::vector<nn::WindowSample> batch;
    for (int b = 0; b < 3; ++b)
      batch.push_back({random_matrix(topo.n_joints, topo.window, rng), random_matrix(topo.n_joints, 1, rng)});
    std::uint64_t s = 0;
    const nn::LossAndGrads lg = nn::loss_and_grads(m, batch, 1.0, s);
    for (std::size_t i = 0; i < m.param_count(); ++i) {
      const double fd = central_diff(
          [&] {
            std::uint64_t s2 = 0;
            return nn::loss_and_grads(m, batch, 1.0, s2).mse;
          },
          m.params()[i]);
      worst_param = std::max(worst_param, rel_err(lg.grads[i], fd));
    }

    Eigen::MatrixXd w = random_matrix(topo.n_joints, topo.window, rng);
    const Eigen::VectorXd cot = random_matrix(topo.n_joints, 1, rng);
    const Eigen::MatrixXd g = nn::input_vjp(m, w, cot);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double fd = central_diff([&] { return cot.dot(nn::model_forward(m, w)); }, w.data()[i]);
      worst_input = std::max(worst_input, rel_err(g.data()[i], fd));
    }
  }
  const double secs = since(t0);
  return {worst_param < 1e-4 && worst_input < 1e-4 && secs < 60.0,
          "20 models, worst parameter rel err " + fmt(worst_param, 3) + ", worst input rel err " +
              fmt(worst_input, 3) + ", " + fmt(secs, 3) + " s (limits 1e-4, 60 s)"};
}

Outcome windowing_counts() {
  const std::size_t f1 = data::forward_sample_count(2500, 50), i1 = data::inverse_sample_count(2500, 50);
  std::vector<data::TrajectoryPair> pairs(500);
  for (auto& p : pairs) {
    p.q_d = Trajectory(1, 2500, 100.0);
    p.q = Trajectory(1, 2500, 100.0);
  }
  const std::size_t fa = data::forward_window_set(pairs, 50).size();
  const std::size_t ia = data::inverse_window_set(pairs, 50).size();
  return {f1 == 2450 && i1 == 2451 && fa == 1225000 && ia == 1225500,
          "N=2500 T=50: " + std::to_string(f1) + " forward / " + std::to_string(i1) + " inverse; 500 pairs: " +
              std::to_string(fa) + " / " + std::to_string(ia)};
}

Outcome forward_fidelity(const harness::PipelineResult& res) {
  const double secs = res.seconds.at("train_forward");
  return {res.forward_fidelity.nmse < 0.05 && secs <= 600.0,
          "held-out normalised one-step MSE " + fmt(res.forward_fidelity.nmse) + " (limit 0.05), training " +
              fmt(secs, 3) + " s (limit 600 s)"};
}

Outcome ilc_linear_surrogate() {
  std::mt19937_64 rng(7);
  const int n = 2, H = 4, T = 5, N = 40;
  // Same readout structure as the trained forward models (input skip on).
  nn::RecurrentModel m = nn::RecurrentModel::random(
      nn::Topology{nn::Direction::kUnidirectional, n, H, 1, T, nn::CellKind::kLinearSurrogate, true}, 8);
  auto v = m.layer(0, 0);
  for (int i = 0; i < 3 * H * H; ++i) v.u[i] *= 0.3;

  // Target: rollout of some input plus noise, so the least-squares optimum has
  // a small non-zero error.
  Trajectory u_true(random_matrix(n, N, rng, 0.5), 100.0);
  Trajectory q_d = u_true;
  q_d.data.rightCols(N - T) = ilc::predict_rollout(m, u_true).data + random_matrix(n, N - T, rng, 0.02);

  const auto vec = [](const Eigen::MatrixXd& x) { return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(x.data(), x.size())); };
  const Eigen::MatrixXd G = rollout_map(m, N);
  const Eigen::VectorXd offset = vec(ilc::predict_rollout(m, Trajectory(Eigen::MatrixXd::Zero(n, N), 100.0)).data);
  const Eigen::VectorXd rhs = vec(q_d.data.rightCols(N - T)) - offset - G.leftCols(n * T) * vec(q_d.data.leftCols(T));
  const Eigen::MatrixXd free = G.rightCols(n * (N - T));
  const Eigen::VectorXd sol = free.colPivHouseholderQr().solve(rhs);
  const double oracle = (free * sol - rhs).norm();

  ilc::IlcConfig cfg;
  cfg.clamp_to_limits = false;
  cfg.max_iters = 50;
  cfg.convergence_tol = 1e-12;
  const ilc::IlcState st = ilc::ilc_refine(m, q_d, cfg);
  bool monotone = true;
  for (std::size_t i = 1; i < st.error_history.size(); ++i)
    monotone = monotone && st.error_history[i] <= st.error_history[i - 1];
  const double e0 = st.error_history.front(), e1 = st.error_history.back();
  const bool ratio_ok = e1 < 0.1 * e0;
  const bool oracle_ok = e1 <= 1.05 * oracle;
  return {ratio_ok && monotone && oracle_ok && st.iter <= 50,
          "error " + fmt(e0) + " -> " + fmt(e1) + " in " + std::to_string(st.iter) + " iterations (ratio " +
              fmt(e1 / e0, 3) + ", limit 0.1), monotone " + (monotone ? "yes" : "no") + ", least-squares optimum " +
              fmt(oracle) + " (limit +5 %)"};
}

const harness::ExperimentResult* find_experiment(const harness::PipelineResult& res, harness::ExperimentKind kind) {
  for (const auto& e : res.experiments)
    if (e.report.experiment == harness::to_string(kind)) return &e;
  return nullptr;
}

double improvement(const harness::ExperimentResult& e, const std::string& table, const std::string& controller,
                   const std::vector<int>& rows = {}) {
  const harness::MetricsTable* t = harness::find_table(e.report, table);
  require(t != nullptr, "missing_table", table);
  const harness::Metrics* base = harness::find_metrics(*t, "baseline");
  const harness::Metrics* m = harness::find_metrics(*t, controller);
  require(base != nullptr && m != nullptr, "missing_controller", controller);
  return harness::mean_improvement(*base, *m, rows);
}

Outcome approaches(const harness::PipelineResult& res) {
  bool pass = true;
  std::string detail;
  const double shared = res.seconds.at("collect") + res.seconds.at("train_forward") + res.seconds.at("train_inverse");
  for (harness::ExperimentKind kind : {harness::ExperimentKind::kSinusoid, harness::ExperimentKind::kRandom}) {
    const harness::ExperimentResult* e = find_experiment(res, kind);
    if (e == nullptr) return {false, "experiment " + harness::to_string(kind) + " missing"};
    const double a1 = improvement(*e, "joint", "approach1"), a2 = improvement(*e, "joint", "approach2");
    const double run = shared + e->seconds;
    pass = pass && a1 >= 30.0 && a2 >= 30.0 && run < 900.0;
    detail += harness::to_string(kind) + ": approach1 " + fmt(a1, 3) + " %, approach2 " + fmt(a2, 3) + " %, run " +
              fmt(run, 3) + " s; ";
  }
  return {pass, detail + "limits 30 %, 900 s"};
}

Outcome cartesian_square(const harness::PipelineResult& res) {
  const harness::ExperimentResult* e = find_experiment(res, harness::ExperimentKind::kCartesianSquare);
  if (e == nullptr) return {false, "experiment missing"};
  const double dev = e->report.details.at("reference").at("max_orientation_deviation_rad").get<double>();
  bool pass = dev < 1e-3;
  std::string detail;
  for (const char* c : {"approach1", "approach2"}) {
    const double x = improvement(*e, "cartesian", c, {0}), y = improvement(*e, "cartesian", c, {1});
    pass = pass && x >= 30.0 && y >= 30.0;
    detail += std::string(c) + " x " + fmt(x, 3) + " %, y " + fmt(y, 3) + " %; ";
  }
  return {pass, detail + "reference orientation deviation " + fmt(dev, 3) + " rad (limits 30 %, 1e-3 rad)"};
}

Outcome plant_ilc(const harness::PipelineResult& res) {
  bool pass = true;
  int checked = 0;
  std::string detail;
  for (const auto& e : res.experiments) {
    for (const char* key : {"plant_ilc_approach1", "plant_ilc_approach2"}) {
      if (!e.report.details.contains(key)) continue;
      const std::vector<double> h = e.report.details.at(key).at("error_history").get<std::vector<double>>();
      bool mono = !h.empty();
      for (std::size_t i = 1; i < h.size(); ++i) mono = mono && h[i] <= h[i - 1];
      pass = pass && mono;
      ++checked;
      if (!h.empty())
        detail += e.report.experiment + "/" + (key + 10) + " " + fmt(h.front()) + " -> " + fmt(h.back()) + "; ";
    }
  }
  return {pass && checked > 0, std::to_string(checked) + " runs, plant error never increased: " +
                                   (pass ? "yes" : "no") + "; " + detail};
}

Outcome streaming(const harness::PipelineResult& res) {
  const nn::RecurrentModel& m = res.inverse.model;
  const int T = m.topology().window;
  const Trajectory q_d = harness::held_out_trajectory(harness::ExperimentKind::kRandom, PlantConfig::defaults(),
                                                      harness::desk_profile(), 5);
  const Trajectory batch = control::filter_trajectory(m, q_d);
  control::StreamState s(m);
  bool equal = true, latency_ok = true;
  int compared = 0;
  for (Eigen::Index i = 0; i < q_d.length(); ++i) {
    const std::uint64_t index = s.next_index();
    const auto out = control::stream_push(s, q_d.sample(i));
    if (!out) continue;
    latency_ok = latency_ok && static_cast<Eigen::Index>(index) == i - (T / 2 - 1);
    equal = equal && (out->array() == batch.sample(static_cast<Eigen::Index>(index)).array()).all();
    ++compared;
  }
  return {equal && latency_ok && T == 50 && compared > 0,
          std::to_string(compared) + " streamed samples bit-equal: " + (equal ? "yes" : "no") + ", latency " +
              std::to_string(T / 2 - 1) + " samples at T = " + std::to_string(T) + (latency_ok ? "" : " (violated)")};
}

Outcome qp_problems() {
  std::mt19937_64 rng(314);
  double kkt = 0.0, viol = 0.0, oracle = 0.0;
  for (int k = 0; k < 100; ++k) {
    control::QpProblem p;
    p.J = random_matrix(6, 7, rng);
    p.v_d = 2.0 * random_matrix(6, 1, rng);
    p.lock_orientation = k % 2 == 1;
    if (p.lock_orientation && k % 4 == 1) p.v_d.head<3>().setZero();
    if (k % 3 != 0) {
      p.qdot_lo = -0.2 - 0.5 * random_matrix(7, 1, rng).cwiseAbs().array();
      p.qdot_hi = 0.2 + 0.5 * random_matrix(7, 1, rng).cwiseAbs().array();
    }
    const control::DenseQp qp = control::to_dense(p);
    const control::DenseQpResult r = control::solve_dense_qp(qp);
    Eigen::VectorXd stat = qp.G * r.x + qp.a;
    if (qp.C.rows() > 0) stat -= qp.C.transpose() * r.ineq_multipliers;
    if (qp.E.rows() > 0) stat -= qp.E.transpose() * r.eq_multipliers;
    double k_res = stat.cwiseAbs().maxCoeff();
    double v = 0.0;
    if (qp.C.rows() > 0) {
      const Eigen::VectorXd slack = qp.C * r.x - qp.c;
      k_res = std::max(k_res, (r.ineq_multipliers.array() * slack.array()).abs().maxCoeff());
      k_res = std::max(k_res, std::max(0.0, -r.ineq_multipliers.minCoeff()));
      v = std::max(v, (-slack).maxCoeff());
    }
    if (qp.E.rows() > 0) v = std::max(v, (qp.E * r.x - qp.e).cwiseAbs().maxCoeff());
    kkt = std::max(kkt, k_res);
    viol = std::max(viol, v);
    // x = 0 satisfies the lock rows and sits strictly inside the box.
    const double d = (r.x - barrier_solve(qp, Eigen::VectorXd::Zero(qp.G.rows()))).cwiseAbs().maxCoeff();
    oracle = std::max(oracle, d);
  }
  return {kkt < 1e-6 && viol < 1e-8 && oracle < 1e-6,
          "100 problems: max KKT residual " + fmt(kkt, 3) + ", max violation " + fmt(std::max(viol, 0.0), 3) +
              ", max oracle distance " + fmt(oracle, 3) + " (limits 1e-6, 1e-8, 1e-6)"};
}

Outcome teleop_replay(const harness::PipelineResult& res) {
  const harness::ExperimentResult* e = find_experiment(res, harness::ExperimentKind::kTeleopReplay);
  if (e == nullptr) return {false, "experiment missing"};
  const harness::MetricsTable* t = harness::find_table(e->report, "joint");
  const Eigen::VectorXd imp =
      harness::improvement_per_row(*harness::find_metrics(*t, "baseline"), *harness::find_metrics(*t, "approach2"));
  const int improved = static_cast<int>((imp.array() > 0.0).count());
  const double mean = imp.mean();
  std::string rows;
  for (Eigen::Index i = 0; i < imp.size(); ++i) rows += (i ? " " : "") + fmt(imp[i], 3);
  return {improved >= 5 && mean >= 20.0,
          std::to_string(improved) + "/" + std::to_string(imp.size()) + " joints improved, mean " + fmt(mean, 3) +
              " % (limits 5 joints, 20 %); per joint [" + rows + "]; errors " +
              e->report.details.at("session_errors").dump()};
}

// Small profile so that two full pipeline runs take seconds.
harness::Profile reduced_profile() {
  harness::Profile p = harness::desk_profile();
  p.campaign.n_random = 2;
  p.campaign.n_sinusoid = 2;
  p.campaign.samples_per_traj = 200;
  p.forward = {4, 1};
  p.inverse = {4, 1};
  for (nn::TrainConfig* t : {&p.train_forward, &p.train_inverse}) {
    t->max_iters = 40;
    t->log_interval = 10;
    t->batch_size = 8;
    t->dropout_keep = 0.8;
  }
  p.ilc.max_iters = 2;
  p.plant_ilc.max_iters = 1;
  p.test_samples = 200;
  p.fidelity_trajectories = 2;
  p.teleop_log.duration_s = 2.0;
  return p;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs = {root / "determinism_a", root / "determinism_b"};
  for (const auto& d : dirs) {
    std::filesystem::remove_all(d);
    harness::PipelineOptions opt;
    opt.profile = reduced_profile();
    opt.seed = 99;
    opt.out_dir = d;
    harness::run_pipeline(opt);
  }
  std::vector<std::string> files = {"dataset.bin", "forward.ckpt", "inverse.ckpt", "forward_history.json",
                                    "inverse_history.json"};
  for (const auto& entry : std::filesystem::directory_iterator(dirs[0] / "reports"))
    files.push_back("reports/" + entry.path().filename().string());
  std::sort(files.begin(), files.end());
  std::vector<std::string> differing;
  for (const auto& f : files) {
    const std::string a = read_file(dirs[0] / f), b = read_file(dirs[1] / f);
    if (a.empty() || a != b) differing.push_back(f);
  }
  std::string detail = std::to_string(files.size()) + " artifacts compared (campaign, checkpoints, training histories, reports)";
  if (!differing.empty()) {
    detail += "; differing:";
    for (const auto& f : differing) detail += " " + f;
  }
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flexff acceptance suite"};
  std::string out = "acceptance_out";
  std::uint64_t seed = 0;
  std::string only;
  app.add_option("--out", out, "Directory for pipeline artifacts");
  app.add_option("--seed", seed, "Pipeline seed");
  app.add_option("--only", only, "Run only criteria whose name contains this text");
  CLI11_PARSE(app, argc, argv);

  using Check = std::function<Outcome()>;
  std::optional<harness::PipelineResult> pipeline;
  const auto need_pipeline = [&]() -> const harness::PipelineResult& {
    if (!pipeline) {
      harness::PipelineOptions opt;
      opt.seed = seed;
      opt.out_dir = std::filesystem::path(out) / "desk";
      opt.progress = [](const std::string& line) { std::cerr << "  [pipeline] " << line << std::endl; };
      pipeline = harness::run_pipeline(opt);
    }
    return *pipeline;
  };
  const std::vector<std::pair<std::string, Check>> checks = {
      {"gradient correctness", gradient_correctness},
      {"windowing counts", windowing_counts},
      {"forward-model fidelity", [&] { return forward_fidelity(need_pipeline()); }},
      {"ILC on linear surrogate", ilc_linear_surrogate},
      {"approach 1 and approach 2 improvement", [&] { return approaches(need_pipeline()); }},
      {"cartesian square", [&] { return cartesian_square(need_pipeline()); }},
      {"plant-side ILC never increases error", [&] { return plant_ilc(need_pipeline()); }},
      {"streaming/batch equivalence", [&] { return streaming(need_pipeline()); }},
      {"QP on random problems", qp_problems},
      {"teleop replay", [&] { return teleop_replay(need_pipeline()); }},
      {"determinism", [&] { return determinism(out); }},
  };

  int failed = 0, ran = 0;
  for (const auto& [name, check] : checks) {
    if (!only.empty() && name.find(only) == std::string::npos) continue;
    ++ran;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
  }
  std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
