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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "flexff/common/error.hpp"
#include "flexff/harness/cartesian.hpp"
#include "flexff/harness/experiment.hpp"
#include "flexff/harness/metrics.hpp"
#include "flexff/harness/profile.hpp"
#include "flexff/harness/report.hpp"
#include "flexff/sim/config_io.hpp"
#include "flexff/sim/kinematics.hpp"
#include "test_util.hpp"

using namespace flexff;
using namespace flexff::harness;
using flexff::testing::random_matrix;

namespace {

Metrics naive_metrics(const Eigen::MatrixXd& q, const Eigen::MatrixXd& q_d) {
  Metrics m;
  m.l2 = Eigen::VectorXd::Zero(q.rows());
  m.linf = Eigen::VectorXd::Zero(q.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double s = 0.0, mx = 0.0;
    for (Eigen::Index t = 0; t < q.cols(); ++t) {
      const double e = q(i, t) - q_d(i, t);
      s += e * e;
      mx = std::max(mx, std::abs(e));
    }
    m.l2[i] = std::sqrt(s);
    m.linf[i] = mx;
  }
  return m;
}

std::size_t count(const std::string& s, char c) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), c)); }

Report sample_report() {
  Report r;
  r.experiment = "sinusoid";
  r.seed = 17;
  MetricsTable t{"joint", "rad", {"joint1", "joint2"}, {}};
  Metrics base{Eigen::Vector2d(0.5, 0.2), Eigen::Vector2d(0.1, 0.05)};
  Metrics a1{Eigen::Vector2d(0.25, 0.3), Eigen::Vector2d(0.05, 0.06)};
  Metrics a2{Eigen::Vector2d(0.1, 1.0 / 3.0), Eigen::Vector2d(0.02, 0.07)};
  t.controllers = {{"baseline", base}, {"approach1", a1}, {"approach2", a2}};
  r.tables.push_back(t);
  r.details["ilc"] = {{"iterations", 3}};
  return r;
}

}  // namespace

TEST_CASE("metrics match a naive loop") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd q = random_matrix(7, 50 + trial, rng), q_d = random_matrix(7, 50 + trial, rng);
    const Metrics fast = compute_metrics(q, q_d), slow = naive_metrics(q, q_d);
    CHECK((fast.l2 - slow.l2).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((fast.linf - slow.linf).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("metrics on a hand-computed error") {
  Eigen::MatrixXd q_d = Eigen::MatrixXd::Zero(1, 4);
  Eigen::MatrixXd q(1, 4);
  q << 0.3, -0.4, 0.0, 0.0;
  const Metrics m = compute_metrics(q, q_d);
  CHECK(m.l2[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.linf[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK_THROWS_AS(compute_metrics(q, Eigen::MatrixXd::Zero(2, 4)), Error);
}

TEST_CASE("metrics are invariant to permuting time") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd q = random_matrix(3, 40, rng), q_d = random_matrix(3, 40, rng);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd qp(3, 40), q_dp(3, 40);
  for (int t = 0; t < 40; ++t) {
    qp.col(t) = q.col(perm[t]);
    q_dp.col(t) = q_d.col(perm[t]);
  }
  const Metrics a = compute_metrics(q, q_d), b = compute_metrics(qp, q_dp);
  CHECK((a.l2 - b.l2).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.linf == b.linf);
}

TEST_CASE("improvement percentages") {
  Metrics base{Eigen::Vector3d(0.5, 0.0, 0.2), Eigen::Vector3d::Zero()};
  Metrics app{Eigen::Vector3d(0.25, 0.0, 0.3), Eigen::Vector3d::Zero()};
  const Eigen::VectorXd imp = improvement_per_row(base, app);
  CHECK(imp[0] == doctest::Approx(50.0));
  CHECK(imp[1] == 0.0);
  CHECK(imp[2] == doctest::Approx(-50.0));
  CHECK(mean_improvement(base, app) == doctest::Approx(0.0));
  CHECK(mean_improvement(base, app, {0}) == doctest::Approx(50.0));
  CHECK(mean_improvement(base, base) == 0.0);
}

TEST_CASE("square path corners and timing") {
  SquareSpec spec;
  spec.period_s = 8.0;
  const Eigen::MatrixXd p = square_path(spec);
  REQUIRE(p.cols() == 801);
  const double h = spec.side_m / 2.0;
  const auto at = [&](Eigen::Index t) { return Eigen::Vector3d(p.col(t)); };
  CHECK((at(0) - Eigen::Vector3d(0.55 - h, -h, 0.2)).norm() < 1e-15);
  CHECK((at(200) - Eigen::Vector3d(0.55 + h, -h, 0.2)).norm() < 1e-12);
  CHECK((at(400) - Eigen::Vector3d(0.55 + h, h, 0.2)).norm() < 1e-12);
  CHECK((at(600) - Eigen::Vector3d(0.55 - h, h, 0.2)).norm() < 1e-12);
  CHECK((at(800) - at(0)).norm() < 1e-12);
  CHECK((p.row(2).array() == 0.2).all());

  spec.side_m = 0.0;
  const Eigen::MatrixXd still = square_path(spec);
  for (Eigen::Index t = 0; t < still.cols(); ++t) CHECK((still.col(t) - still.col(0)).norm() == 0.0);
}

TEST_CASE("square joint reference replays to the Cartesian path") {
  const PlantConfig plant = PlantConfig::defaults();
  const SquareReference ref = cartesian_square_reference(plant, SquareSpec{});
  CHECK(ref.q_d.length() == 401);
  CHECK(ref.max_position_deviation < 1e-3);
  CHECK(ref.max_orientation_deviation < 1e-3);
  const Eigen::MatrixXd xyz = cartesian_positions(plant.kinematic_params, ref.q_d);
  CHECK((xyz - ref.xyz_ref).cwiseAbs().maxCoeff() < 1e-3);
  for (Eigen::Index t = 0; t < ref.q_d.length(); t += 40) {
    const Pose pose = forward_kinematics(plant.kinematic_params, ref.q_d.sample(t));
    CHECK(orientation_error(pose.orientation, ref.orientation).norm() < 1e-3);
  }
  for (Eigen::Index t = 0; t < ref.q_d.length(); ++t) {
    REQUIRE((ref.q_d.sample(t).array() >= plant.joint_limits_lo.array()).all());
    REQUIRE((ref.q_d.sample(t).array() <= plant.joint_limits_hi.array()).all());
  }
}

TEST_CASE("a square out of reach is reported as unreachable") {
  SquareSpec spec;
  spec.center = Eigen::Vector2d(2.0, 0.0);
  try {
    cartesian_square_reference(PlantConfig::defaults(), spec);
    FAIL("expected unreachable");
  } catch (const Error& e) {
    CHECK(e.code() == "unreachable");
  }
}

TEST_CASE("inverse kinematics recovers a reachable pose") {
  const KinematicChain chain = KinematicChain::baxter_like();
  JointVector q(7);
  q << 0.2, -0.4, 0.3, 0.9, -0.2, 0.8, 0.1;
  const Pose target = forward_kinematics(chain, q);
  JointVector seed = q;
  seed.array() += 0.1;
  const Pose got = forward_kinematics(chain, inverse_kinematics(chain, target, seed));
  CHECK((got.position - target.position).norm() < 1e-9);
  CHECK(orientation_error(got.orientation, target.orientation).norm() < 1e-9);
}

TEST_CASE("an empty report emits only the CSV header") {
  Report r;
  r.experiment = "random";
  const std::string csv = format_report(r, ReportFormat::kCsv);
  CHECK(csv == "table,row,unit,controller,l2,linf,improvement_pct\n");
}

TEST_CASE("report CSV rows carry improvements") {
  const std::string csv = format_report(sample_report(), ReportFormat::kCsv);
  CHECK(count(csv, '\n') == 1 + 2 * 3);
  CHECK(csv.find("joint,joint1,rad,approach1,0.25,0.050000000000000003,50") != std::string::npos);
}

TEST_CASE("markdown tables have two columns per controller") {
  const std::string md = format_report(sample_report(), ReportFormat::kMarkdown);
  std::istringstream in(md);
  std::string line;
  int table_lines = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '|') continue;
    ++table_lines;
    // Leading and trailing bar plus one bar between each of 2 + 2·3 cells.
    CHECK(count(line, '|') == 2 + 2 * 3 + 1);
  }
  CHECK(table_lines == 4);
  CHECK(md.find("RNN + ILC + Feedback") != std::string::npos);
  CHECK(md.find("BRNN + Feedback") != std::string::npos);
}

TEST_CASE("reports round-trip through JSON") {
  const Report r = sample_report();
  CHECK(report_from_json(nlohmann::json::parse(format_report(r, ReportFormat::kJson))) == r);
  CHECK_THROWS_AS(report_from_json(nlohmann::json::parse(R"({"experiment":3})")), Error);
  CHECK_THROWS_AS(report_format_from_string("xml"), Error);
}

TEST_CASE("profiles round-trip and accept partial overrides") {
  for (const char* name : {"desk", "paper"}) {
    const Profile p = profile_by_name(name);
    const Profile back = profile_from_json(to_json(p), desk_profile());
    CHECK(to_json(back) == to_json(p));
  }
  const Profile p = profile_from_json(nlohmann::json::parse(R"({"forward":{"hidden":8},"test_samples":300})"),
                                      desk_profile());
  CHECK(p.forward.hidden == 8);
  CHECK(p.forward.layers == desk_profile().forward.layers);
  CHECK(p.test_samples == 300);
  CHECK_THROWS_AS(profile_by_name("huge"), Error);

  const Profile full = paper_profile();
  CHECK(full.campaign.n_random + full.campaign.n_sinusoid == 500);
  CHECK(full.campaign.samples_per_traj == 2500);
  CHECK(full.window == 50);
  CHECK(forward_topology(full, 7).layers == 4);
  CHECK(inverse_topology(full, 7).layers == 2);
  CHECK(inverse_topology(full, 7).direction == nn::Direction::kBidirectional);
}

TEST_CASE("identity feedforward gives exactly zero improvement") {
  ExperimentSpec spec;
  spec.identity_feedforward = true;
  spec.profile.test_samples = 300;
  spec.profile.teleop_log.duration_s = 3.0;
  for (ExperimentKind kind : {ExperimentKind::kSinusoid, ExperimentKind::kTeleopReplay}) {
    spec.kind = kind;
    const ExperimentResult r = run_experiment(spec);
    const MetricsTable* t = find_table(r.report, "joint");
    REQUIRE(t != nullptr);
    const Metrics* base = find_metrics(*t, "baseline");
    const Metrics* a2 = find_metrics(*t, "approach2");
    REQUIRE(base != nullptr);
    REQUIRE(a2 != nullptr);
    CHECK(*base == *a2);
    CHECK(mean_improvement(*base, *a2) == 0.0);
    if (const Metrics* a1 = find_metrics(*t, "approach1")) CHECK(mean_improvement(*base, *a1) == 0.0);
  }
}

TEST_CASE("evaluating without checkpoints fails cleanly") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::kRandom;
  try {
    run_experiment(spec);
    FAIL("expected missing_checkpoint");
  } catch (const Error& e) {
    CHECK(e.code() == "missing_checkpoint");
  }
  spec.forward_checkpoint = "/nonexistent/forward.ckpt";
  spec.inverse_checkpoint = "/nonexistent/inverse.ckpt";
  try {
    run_experiment(spec);
    FAIL("expected missing_checkpoint");
  } catch (const Error& e) {
    CHECK(e.code() == "missing_checkpoint");
  }
}

TEST_CASE("held-out trajectories are disjoint from the campaign") {
  const PlantConfig plant = PlantConfig::defaults();
  const Profile p = desk_profile();
  const Trajectory a = held_out_trajectory(ExperimentKind::kSinusoid, plant, p, 0);
  const Trajectory b = held_out_trajectory(ExperimentKind::kSinusoid, plant, p, 0);
  const Trajectory c = held_out_trajectory(ExperimentKind::kSinusoid, plant, p, 1);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.length() == p.test_samples);
  CHECK_THROWS_AS(held_out_trajectory(ExperimentKind::kTeleopReplay, plant, p, 0), Error);
}
