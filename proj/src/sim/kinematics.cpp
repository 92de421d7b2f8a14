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

#include "flexff/sim/kinematics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace flexff {
namespace {

struct Rigid {
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d trans = Eigen::Vector3d::Zero();

  Rigid operator*(const Rigid& o) const { return {rot * o.rot, rot * o.trans + trans}; }
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rot * p + trans; }
};

Rigid joint_exp(const JointAxis& j, double angle) {
  Rigid t;
  t.rot = Eigen::AngleAxisd(angle, j.axis).toRotationMatrix();
  t.trans = (Eigen::Matrix3d::Identity() - t.rot) * j.point;
  return t;
}

void check_input(const KinematicChain& chain, const JointVector& q) {
  require(static_cast<std::size_t>(q.size()) == chain.n_joints(), "shape_mismatch",
          "joint vector size does not match kinematic chain");
  require(q.allFinite(), "non_finite", "joint vector contains non-finite values");
}

}  // namespace

KinematicChain KinematicChain::from_dh(const std::vector<DhRow>& rows) {
  KinematicChain chain;
  Rigid frame;
  for (const DhRow& r : rows) {
    // Joint i rotates about z of the previous frame.
    chain.joints.push_back({frame.rot.col(2), frame.trans});
    Rigid step;
    step.rot = (Eigen::AngleAxisd(r.theta_offset, Eigen::Vector3d::UnitZ()) *
                Eigen::AngleAxisd(r.alpha, Eigen::Vector3d::UnitX()))
                   .toRotationMatrix();
    step.trans = Eigen::AngleAxisd(r.theta_offset, Eigen::Vector3d::UnitZ()) *
                 Eigen::Vector3d(r.a, 0.0, r.d);
    frame = frame * step;
  }
  chain.home_position = frame.trans;
  chain.home_orientation = Eigen::Quaterniond(frame.rot).normalized();
  return chain;
}

KinematicChain KinematicChain::baxter_like() {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  return from_dh({{0.27035, 0.069, -kHalfPi, 0.0},
                  {0.0, 0.0, kHalfPi, kHalfPi},
                  {0.36435, 0.069, -kHalfPi, 0.0},
                  {0.0, 0.0, kHalfPi, 0.0},
                  {0.37429, 0.010, -kHalfPi, 0.0},
                  {0.0, 0.0, kHalfPi, 0.0},
                  {0.229525, 0.0, 0.0, 0.0}});
}

KinematicChain KinematicChain::planar(const std::vector<double>& link_lengths) {
  KinematicChain chain;
  double x = 0.0;
  for (double l : link_lengths) {
    chain.joints.push_back({Eigen::Vector3d::UnitZ(), Eigen::Vector3d(x, 0.0, 0.0)});
    x += l;
  }
  chain.home_position = Eigen::Vector3d(x, 0.0, 0.0);
  return chain;
}

Pose forward_kinematics(const KinematicChain& chain, const JointVector& q) {
  check_input(chain, q);
  Rigid t;
  for (std::size_t i = 0; i < chain.n_joints(); ++i) t = t * joint_exp(chain.joints[i], q[i]);
  Pose pose;
  pose.position = t.apply(chain.home_position);
  pose.orientation = Eigen::Quaterniond(t.rot * chain.home_orientation.toRotationMatrix());
  pose.orientation.normalize();
  return pose;
}

Eigen::MatrixXd jacobian(const KinematicChain& chain, const JointVector& q) {
  check_input(chain, q);
  const std::size_t n = chain.n_joints();
  Eigen::MatrixXd jac(6, n);
  std::vector<Eigen::Vector3d> axes(n), points(n);
  Rigid t;
  for (std::size_t i = 0; i < n; ++i) {
    axes[i] = t.rot * chain.joints[i].axis;
    points[i] = t.apply(chain.joints[i].point);
    t = t * joint_exp(chain.joints[i], q[i]);
  }
  const Eigen::Vector3d tip = t.apply(chain.home_position);
  for (std::size_t i = 0; i < n; ++i) {
    jac.block<3, 1>(0, i) = axes[i];
    jac.block<3, 1>(3, i) = axes[i].cross(tip - points[i]);
  }
  return jac;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& jac, JacobianRows rows) {
  switch (rows) {
    case JacobianRows::kPosition:
      return jac.bottomRows(3);
    case JacobianRows::kPlanarXY:
      return jac.middleRows(3, 2);
    case JacobianRows::kFull:
      break;
  }
  return jac;
}

double manipulability(const KinematicChain& chain, const JointVector& q, JacobianRows rows) {
  const Eigen::MatrixXd j = select_rows(jacobian(chain, q), rows);
  // det(J Jᵀ) vanishes identically when J has more rows than columns.
  if (j.rows() > j.cols()) return 0.0;
  // Product of singular values equals sqrt(det(J Jᵀ)) without squaring the
  // rounding error near singular configurations.
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues();
  return sv.prod();
}

Eigen::Vector3d orientation_error(const Eigen::Quaterniond& to, const Eigen::Quaterniond& from) {
  Eigen::Quaterniond d = to * from.conjugate();
  if (d.w() < 0.0) d.coeffs() = -d.coeffs();
  const Eigen::AngleAxisd aa(d);
  return aa.angle() * aa.axis();
}

JointVector inverse_kinematics(const KinematicChain& chain, const Pose& target, const JointVector& seed,
                               const IkOptions& options) {
  check_input(chain, seed);
  JointVector q = seed;
  const auto n = static_cast<Eigen::Index>(chain.n_joints());
  for (int it = 0; it < options.max_iters; ++it) {
    const Pose pose = forward_kinematics(chain, q);
    Eigen::Matrix<double, 6, 1> err;
    err << orientation_error(target.orientation, pose.orientation), target.position - pose.position;
    if (err.head<3>().norm() < options.tolerance && err.tail<3>().norm() < options.tolerance) return q;
    const Eigen::MatrixXd j = jacobian(chain, q);
    const Eigen::MatrixXd a = j.transpose() * j + options.damping * Eigen::MatrixXd::Identity(n, n);
    q += a.ldlt().solve(j.transpose() * err);
  }
  throw Error("unreachable", "inverse kinematics did not converge within " + std::to_string(options.max_iters) +
                                 " iterations");
}

}  // namespace flexff
