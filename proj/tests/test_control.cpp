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

#include <random>

#include <Eigen/Dense>

#include "flexff/control/feedback.hpp"
#include "flexff/control/qp.hpp"
#include "flexff/nn/train.hpp"
#include "qp_oracle.hpp"
#include "test_util.hpp"

using namespace flexff;
using namespace flexff::control;
using flexff::testing::barrier_solve;
using flexff::testing::random_matrix;

namespace {

Eigen::VectorXd stack(const QpSolution& s) {
  Eigen::VectorXd x(s.qdot.size() + 2);
  x << s.qdot, s.alpha_r, s.alpha_p;
  return x;
}

// Largest violation of E x = e and C x ≥ c.
double constraint_violation(const DenseQp& qp, const Eigen::VectorXd& x) {
  double v = 0.0;
  if (qp.E.rows() > 0) v = std::max(v, (qp.E * x - qp.e).cwiseAbs().maxCoeff());
  if (qp.C.rows() > 0) v = std::max(v, (qp.c - qp.C * x).maxCoeff());
  return v;
}

}  // namespace

// Feedback laws.

TEST_CASE("baseline and compensated command arithmetic") {
  const Eigen::VectorXd k = Eigen::VectorXd::Constant(1, 0.5);
  const Eigen::VectorXd one = Eigen::VectorXd::Constant(1, 1.0);
  CHECK(baseline_command(Eigen::VectorXd::Constant(1, 1.1), one, Eigen::VectorXd::Constant(1, 1.2), k)[0] ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(compensated_command(Eigen::VectorXd::Constant(1, 1.1), one, Eigen::VectorXd::Constant(1, 1.2), k)[0] ==
        doctest::Approx(1.0).epsilon(1e-15));
  std::mt19937_64 rng(1);
  const Eigen::VectorXd qd1 = random_matrix(7, 1, rng), qd0 = random_matrix(7, 1, rng);
  const Eigen::VectorXd qf1 = random_matrix(7, 1, rng), q = random_matrix(7, 1, rng);
  const Eigen::VectorXd kk = Eigen::VectorXd::Constant(7, 0.3);
  CHECK(baseline_command(qd1, qd0, qd0, kk) == qd1);
  CHECK(compensated_command(qf1, qd0, qd0, kk) == qf1);
  CHECK(baseline_command(qd1, qd0, q, Eigen::VectorXd::Zero(7)) == qd1);
  CHECK(compensated_command(qd1, qd0, q, kk) == baseline_command(qd1, qd0, q, kk));
}

TEST_CASE("closed loop against an offset identity plant follows the hand recurrence") {
  // Plant double q(t) = q_c(t) + d gives e(t+1) = −k e(t) + d for constant q_d.
  const int N = 30;
  Trajectory q_d(2, N, 100.0);
  q_d.data.row(0).setConstant(0.4);
  q_d.data.row(1).setConstant(-1.0);
  ControllerConfig cfg;
  cfg.k = Eigen::Vector2d(0.3, 0.5);
  for (double d : {0.0, 0.1}) {
    const auto out = run_closed_loop([d](const JointVector& q_c) { return JointVector(q_c.array() + d); }, q_d,
                                     std::nullopt, cfg);
    Eigen::Vector2d e = Eigen::Vector2d::Constant(d);
    for (int t = 0; t < N; ++t) {
      CHECK((out.q.sample(t) - q_d.sample(t) - e).cwiseAbs().maxCoeff() < 1e-15);
      e = (-cfg.k.array() * e.array() + d).matrix();
    }
    if (d == 0.0) CHECK(out.q == q_d);
  }
}

TEST_CASE("zero gain feedforward of q_d equals open-loop simulation") {
  const PlantConfig plant = PlantConfig::defaults();
  std::mt19937_64 rng(2);
  Trajectory q_d(7, 300, 100.0);
  for (int t = 0; t < 300; ++t) q_d.data.col(t) = 0.5 * Eigen::VectorXd::Ones(7) * std::sin(0.05 * t);
  ControllerConfig cfg;
  cfg.k = Eigen::VectorXd::Zero(1);
  cfg.mode = ControlMode::kFeedforward;
  CHECK(run_closed_loop(plant, q_d, q_d, cfg).q == simulate(plant, q_d));
}

TEST_CASE("compensated law with q_f = q_d issues exactly the baseline commands") {
  const PlantConfig plant = PlantConfig::defaults();
  Trajectory q_d(7, 400, 100.0);
  for (int t = 0; t < 400; ++t)
    for (int j = 0; j < 7; ++j) q_d.data(j, t) = 0.4 * std::sin(0.03 * (j + 1) * t);
  ControllerConfig base;
  ControllerConfig ff = base;
  ff.mode = ControlMode::kFeedforward;
  const auto a = run_closed_loop(plant, q_d, std::nullopt, base);
  const auto b = run_closed_loop(plant, q_d, q_d, ff);
  CHECK(a.q_c == b.q_c);
  CHECK(a.q == b.q);
}

TEST_CASE("default gain keeps the baseline loop stable and imperfect") {
  const PlantConfig plant = PlantConfig::defaults();
  const int N = 10000;
  Trajectory q_d(7, N, 100.0);
  for (int t = 0; t < N; ++t)
    for (int j = 0; j < 7; ++j) q_d.data(j, t) = 0.5 * plant.joint_limits_hi[j] * std::sin(2.0 * 3.14159 * 0.5 * t * 0.01 + j);
  const auto out = run_closed_loop(plant, q_d, std::nullopt, ControllerConfig{});
  const Eigen::MatrixXd err = out.q.data - q_d.data;
  // Bounded over the run and no growth between the first and last stretches.
  CHECK(err.cwiseAbs().maxCoeff() < 1.0);
  CHECK(err.rightCols(1000).norm() < 1.1 * err.middleCols(1000, 1000).norm());
  CHECK(err.rightCols(1000).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("closed loop input checks") {
  const PlantConfig plant = PlantConfig::defaults();
  ControllerConfig ff;
  ff.mode = ControlMode::kFeedforward;
  CHECK_THROWS_AS(run_closed_loop(plant, Trajectory(7, 10, 100.0), std::nullopt, ff), Error);
  CHECK_THROWS_AS(run_closed_loop(plant, Trajectory(7, 10, 100.0), Trajectory(7, 9, 100.0), ff), Error);
  CHECK_THROWS_AS(run_closed_loop(plant, Trajectory(7, 10, 50.0), std::nullopt, ControllerConfig{}), Error);
}

// Streaming compensator.

TEST_CASE("stream primes on the T-th arrival and matches batch filtering bit for bit") {
  const nn::RecurrentModel m =
      nn::RecurrentModel::random(nn::Topology{nn::Direction::kBidirectional, 3, 6, 2, 50}, 4);
  std::mt19937_64 rng(3);
  const Trajectory q_d(random_matrix(3, 200, rng), 100.0);
  const Trajectory batch = filter_trajectory(m, q_d);
  StreamState s(m);
  int first = -1;
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t index = s.next_index();
    const auto out = stream_push(s, q_d.sample(i));
    if (i < 49) {
      CHECK(!out.has_value());
      continue;
    }
    REQUIRE(out.has_value());
    if (first < 0) first = i + 1;
    // Latency: the emitted index trails the newest arrival by T/2 − 1.
    CHECK(static_cast<int>(index) == i - 24);
    CHECK((out->array() == batch.sample(static_cast<Eigen::Index>(index)).array()).all());
  }
  CHECK(first == 50);
  CHECK(s.emitted() == 151);

  StreamState short_run(m);
  for (int i = 0; i < 49; ++i) CHECK(!stream_push(short_run, q_d.sample(i)).has_value());
  CHECK(!short_run.primed());
}

TEST_CASE("filter boundaries copy q_d and inputs are checked") {
  const nn::RecurrentModel m =
      nn::RecurrentModel::random(nn::Topology{nn::Direction::kBidirectional, 2, 4, 1, 10}, 5);
  std::mt19937_64 rng(4);
  const Trajectory q_d(random_matrix(2, 40, rng), 100.0);
  const Trajectory q_f = filter_trajectory(m, q_d);
  CHECK(q_f.length() == 40);
  CHECK(q_f.data.leftCols(5) == q_d.data.leftCols(5));
  CHECK(q_f.data.rightCols(4) == q_d.data.rightCols(4));
  CHECK(q_f.sample(5) != q_d.sample(5));
  CHECK(q_f.sample(35) == nn::model_forward(m, q_d.data.middleCols(30, 10)));
  CHECK(filter_trajectory(m, Trajectory(q_d.data.leftCols(10), 100.0)).length() == 10);
  CHECK_THROWS_AS(filter_trajectory(m, Trajectory(q_d.data.leftCols(9), 100.0)), Error);
  const nn::RecurrentModel uni =
      nn::RecurrentModel::random(nn::Topology{nn::Direction::kUnidirectional, 2, 4, 1, 10}, 5);
  CHECK_THROWS_AS(StreamState{uni}, Error);
  CHECK_THROWS_AS(filter_trajectory(uni, q_d), Error);
}

TEST_CASE("a compensator trained on an identity plant passes q_d through") {
  // Pairs where the response equals the command.
  std::mt19937_64 rng(5);
  nn::WindowSet data;
  data.window = 10;
  for (int s = 0; s < 8; ++s) {
    Eigen::MatrixXd q(2, 300);
    const double f1 = 0.01 + 0.005 * s, f2 = 0.02 + 0.004 * s;
    for (int t = 0; t < 300; ++t) {
      q(0, t) = std::sin(f1 * t + s);
      q(1, t) = 0.5 * std::cos(f2 * t);
    }
    data.inputs.push_back(q);
    data.targets.push_back(q);
    for (std::uint32_t t = 5; t + 5 <= 300; ++t) data.refs.push_back({static_cast<std::uint32_t>(s), t - 5, t});
  }
  const nn::RecurrentModel init =
      nn::RecurrentModel::random(nn::Topology{nn::Direction::kBidirectional, 2, 12, 1, 10}, 6);
  nn::TrainConfig cfg;
  cfg.max_iters = 1500;
  cfg.batch_size = 32;
  cfg.dropout_keep = 1.0;
  cfg.learning_rate = 1e-2;
  cfg.final_lr_fraction = 0.05;
  const nn::RecurrentModel m = nn::train(init, data, cfg).model;

  Trajectory q_d(2, 200, 100.0);
  for (int t = 0; t < 200; ++t) {
    q_d.data(0, t) = 0.8 * std::sin(0.027 * t);
    q_d.data(1, t) = 0.3 * std::cos(0.033 * t);
  }
  const Trajectory q_f = filter_trajectory(m, q_d);
  CHECK((q_f.data - q_d.data).squaredNorm() / static_cast<double>(q_d.data.size()) < 1e-3);

  // Constant input gives a nearly constant compensated output.
  Trajectory flat(2, 60, 100.0);
  flat.data.row(0).setConstant(0.2);
  flat.data.row(1).setConstant(-0.1);
  const Trajectory f = filter_trajectory(m, flat);
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd row = f.data.row(j).segment(5, 51).transpose();
    CHECK(row.maxCoeff() - row.minCoeff() < 1e-9);
  }
}

// Resolved-velocity QP.

TEST_CASE("qp with zero command and no constraints") {
  std::mt19937_64 rng(6);
  QpProblem p;
  p.J = random_matrix(6, 7, rng);
  const QpSolution s = resolved_velocity_solve(p);
  CHECK(s.qdot.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(s.alpha_r - 1.0) < 1e-14);
  CHECK(std::abs(s.alpha_p - 1.0) < 1e-14);
  CHECK(std::abs(s.objective) < 1e-12);
}

TEST_CASE("qp reproduces an exactly attainable command") {
  std::mt19937_64 rng(7);
  QpProblem p;
  p.J = Eigen::MatrixXd::Identity(6, 6);
  p.v_d = random_matrix(6, 1, rng);
  QpSolution s = resolved_velocity_solve(p);
  CHECK((s.qdot - p.v_d).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(s.alpha_r - 1.0) < 1e-12);
  CHECK(std::abs(s.alpha_p - 1.0) < 1e-12);

  // Redundant arm, command in the range of J.
  p.J = random_matrix(6, 7, rng);
  p.v_d = p.J * random_matrix(7, 1, rng);
  s = resolved_velocity_solve(p);
  CHECK((p.J * s.qdot - p.v_d).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(s.alpha_r - 1.0) < 1e-9);
  CHECK(std::abs(s.alpha_p - 1.0) < 1e-9);
}

TEST_CASE("qp with binding box limits matches the barrier oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    QpProblem p;
    p.J = random_matrix(6, 7, rng);
    p.v_d = 3.0 * random_matrix(6, 1, rng);
    p.qdot_lo = -0.2 - 0.3 * random_matrix(7, 1, rng).cwiseAbs().array();
    p.qdot_hi = 0.2 + 0.3 * random_matrix(7, 1, rng).cwiseAbs().array();
    p.lock_orientation = trial % 2 == 1;
    if (p.lock_orientation) p.v_d.head<3>().setZero();
    const DenseQp qp = to_dense(p);
    const DenseQpResult r = solve_dense_qp(qp);
    const Eigen::VectorXd ref = barrier_solve(qp, Eigen::VectorXd::Zero(9));
    CHECK((r.x - ref).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(constraint_violation(qp, r.x) < 1e-8);
    // KKT: G x + a = Eᵀλ + Cᵀμ, μ ≥ 0, μ ⊥ slack.
    Eigen::VectorXd stat = qp.G * r.x + qp.a - qp.C.transpose() * r.ineq_multipliers;
    if (qp.E.rows() > 0) stat -= qp.E.transpose() * r.eq_multipliers;
    CHECK(stat.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(r.ineq_multipliers.minCoeff() >= 0.0);
    CHECK((r.ineq_multipliers.array() * (qp.C * r.x - qp.c).array()).abs().maxCoeff() < 1e-8);
    CHECK(r.ineq_multipliers.maxCoeff() > 0.0);  // limits really bind
  }
}

TEST_CASE("qp solution beats random feasible perturbations") {
  std::mt19937_64 rng(9);
  QpProblem p;
  p.J = random_matrix(6, 7, rng);
  p.v_d = 2.0 * random_matrix(6, 1, rng);
  p.v_d.head<3>().setZero();
  p.lock_orientation = true;
  p.qdot_lo = Eigen::VectorXd::Constant(7, -0.4);
  p.qdot_hi = Eigen::VectorXd::Constant(7, 0.4);
  const DenseQp qp = to_dense(p);
  const Eigen::VectorXd x = stack(resolved_velocity_solve(p));
  CHECK((p.J.topRows(3) * x.head(7)).cwiseAbs().maxCoeff() <= 1e-8);
  const Eigen::MatrixXd Z = Eigen::FullPivLU<Eigen::MatrixXd>(qp.E).kernel();
  const double f0 = objective(p, x);
  std::normal_distribution<double> nd(0.0, 1.0);
  int tried = 0;
  while (tried < 10000) {
    Eigen::VectorXd y(Z.cols());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = nd(rng);
    const Eigen::VectorXd cand = x + 1e-3 * Z * y;
    if (constraint_violation(qp, cand) > 1e-12) continue;
    ++tried;
    CHECK(f0 <= objective(p, cand) + 1e-12);
  }
}

TEST_CASE("dense qp matches the oracle on random strictly convex problems") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const int nv = 5;
    const Eigen::MatrixXd L = random_matrix(nv, nv, rng);
    DenseQp qp;
    qp.G = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(nv, nv);
    qp.a = random_matrix(nv, 1, rng);
    qp.E = random_matrix(trial % 3, nv, rng);
    qp.e = Eigen::VectorXd::Zero(trial % 3);
    qp.C = random_matrix(8, nv, rng);
    qp.c = -0.1 - random_matrix(8, 1, rng).cwiseAbs().array();  // x = 0 strictly feasible
    const DenseQpResult r = solve_dense_qp(qp);
    CHECK((r.x - barrier_solve(qp, Eigen::VectorXd::Zero(nv))).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("qp infeasibility and bad input are reported") {
  QpProblem p;
  p.J = Eigen::MatrixXd::Identity(6, 6);
  p.qdot_lo = Eigen::VectorXd::Constant(6, 0.5);
  p.qdot_hi = Eigen::VectorXd::Constant(6, 0.2);
  try {
    resolved_velocity_solve(p);
    FAIL("expected infeasible");
  } catch (const Error& e) {
    CHECK(e.code() == "infeasible");
  }

  DenseQp qp;
  qp.G = Eigen::MatrixXd::Identity(2, 2);
  qp.a = Eigen::VectorXd::Zero(2);
  qp.E = Eigen::MatrixXd(2, 2);
  qp.E << 1, 0, 2, 0;
  qp.e = Eigen::Vector2d(1.0, 3.0);
  CHECK_THROWS_AS(solve_dense_qp(qp), Error);
  qp.e = Eigen::Vector2d(1.0, 2.0);  // dependent but consistent
  CHECK(std::abs(solve_dense_qp(qp).x[0] - 1.0) < 1e-12);

  QpProblem bad;
  bad.J = Eigen::MatrixXd::Identity(6, 6);
  bad.v_d[0] = std::nan("");
  CHECK_THROWS_AS(resolved_velocity_solve(bad), Error);
}

TEST_CASE("joint limit box keeps the next position inside the limits") {
  Eigen::VectorXd lo, hi;
  const Eigen::Vector3d q(0.0, 0.99, -0.995);
  joint_limit_box(q, Eigen::Vector3d::Constant(-1.0), Eigen::Vector3d::Constant(1.0), Eigen::Vector3d::Constant(2.0),
                  0.01, lo, hi);
  CHECK(hi[0] == 2.0);
  CHECK(std::abs(hi[1] - 1.0) < 1e-12);
  CHECK(std::abs(lo[2] + 0.5) < 1e-12);
  CHECK(lo[0] == -2.0);
}
