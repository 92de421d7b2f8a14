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

#include "flexff/control/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace flexff::control {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Row {
  Eigen::VectorXd n;
  double b;
  bool equality;
  int index;  // row in E or C
};

}  // namespace

DenseQpResult solve_dense_qp(const DenseQp& qp) {
  const Eigen::Index nv = qp.G.rows();
  require(qp.G.cols() == nv && qp.a.size() == nv, "shape_mismatch", "QP Hessian/linear term shapes differ");
  require(qp.E.rows() == qp.e.size() && (qp.E.rows() == 0 || qp.E.cols() == nv), "shape_mismatch",
          "QP equality shapes differ");
  require(qp.C.rows() == qp.c.size() && (qp.C.rows() == 0 || qp.C.cols() == nv), "shape_mismatch",
          "QP inequality shapes differ");
  require(qp.G.allFinite() && qp.a.allFinite() && qp.E.allFinite() && qp.e.allFinite() && qp.C.allFinite() &&
              qp.c.allFinite(),
          "non_finite", "QP data contains non-finite values");

  const Eigen::LLT<Eigen::MatrixXd> chol(qp.G);
  require(chol.info() == Eigen::Success, "invalid_qp", "QP Hessian is not positive definite");

  DenseQpResult res;
  res.x = -chol.solve(qp.a);
  res.eq_multipliers = Eigen::VectorXd::Zero(qp.E.rows());
  res.ineq_multipliers = Eigen::VectorXd::Zero(qp.C.rows());

  std::vector<Row> active;
  std::vector<double> u;  // multipliers of the active rows

  const double scale = 1.0 + qp.G.cwiseAbs().maxCoeff();
  const auto violation = [&](const Row& r) { return r.n.dot(res.x) - r.b; };

  // Primal direction z and dual direction r for adding row p, from the KKT
  // system [G N; Nᵀ 0][z; r] = [n_p; 0].
  const auto directions = [&](const Eigen::VectorXd& np, Eigen::VectorXd& z, Eigen::VectorXd& r) {
    const Eigen::Index m = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nv + m, nv + m);
    K.topLeftCorner(nv, nv) = qp.G;
    for (Eigen::Index i = 0; i < m; ++i) {
      K.block(0, nv + i, nv, 1) = active[static_cast<std::size_t>(i)].n;
      K.block(nv + i, 0, 1, nv) = active[static_cast<std::size_t>(i)].n.transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv + m);
    rhs.head(nv) = np;
    const Eigen::VectorXd sol = K.partialPivLu().solve(rhs);
    z = sol.head(nv);
    r = sol.tail(m);
  };

  // Adds `p` to the active set, dropping blocking inequality rows on the way.
  const auto add = [&](Row p) {
    double s = violation(p);
    if (p.equality && s > 0.0) {
      p.n = -p.n;
      p.b = -p.b;
      s = -s;
    }
    double up = 0.0;
    const double gnorm = p.n.dot(chol.solve(p.n));
    for (int guard = 0; guard < 1000; ++guard) {
      ++res.iterations;
      Eigen::VectorXd z, r;
      directions(p.n, z, r);
      const double zn = z.dot(p.n);
      const bool dependent = zn <= 1e-13 * gnorm;
      double t2 = dependent ? kInf : -s / zn;
      double t1 = kInf;
      std::size_t drop = active.size();
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (active[i].equality || r[static_cast<Eigen::Index>(i)] <= 0.0) continue;
        const double ratio = u[i] / r[static_cast<Eigen::Index>(i)];
        if (ratio < t1) {
          t1 = ratio;
          drop = i;
        }
      }
      const double t = std::min(t1, t2);
      if (t == kInf) {
        // n_p lies in the span of rows that cannot be released.
        if (p.equality && std::abs(s) <= 1e-10 * (1.0 + std::abs(p.b))) return;
        throw Error("infeasible", std::string("QP constraints are infeasible (") + (p.equality ? "equality" : "inequality") +
                                      " row " + std::to_string(p.index) + ")");
      }
      if (!dependent) {
        res.x += t * z;
        s += t * zn;
      }
      for (std::size_t i = 0; i < active.size(); ++i) u[i] -= t * r[static_cast<Eigen::Index>(i)];
      up += t;
      if (t == t2) {
        active.push_back(std::move(p));
        u.push_back(up);
        return;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    throw Error("qp_stalled", "QP solver did not converge");
  };

  for (Eigen::Index i = 0; i < qp.E.rows(); ++i) add({qp.E.row(i).transpose(), qp.e[i], true, static_cast<int>(i)});

  std::vector<bool> is_active(static_cast<std::size_t>(qp.C.rows()), false);
  for (int outer = 0; outer < 10000; ++outer) {
    std::fill(is_active.begin(), is_active.end(), false);
    for (const Row& r : active)
      if (!r.equality) is_active[static_cast<std::size_t>(r.index)] = true;
    Eigen::Index worst = -1;
    double worst_s = 0.0;
    for (Eigen::Index i = 0; i < qp.C.rows(); ++i) {
      if (is_active[static_cast<std::size_t>(i)]) continue;
      const double norm = qp.C.row(i).norm();
      if (norm == 0.0) {
        require(qp.c[i] <= 0.0, "infeasible", "zero inequality row " + std::to_string(i) + " is violated");
        continue;
      }
      const double s = (qp.C.row(i).dot(res.x) - qp.c[i]) / norm;
      if (s < -1e-12 * scale * (1.0 + std::abs(qp.c[i]) / norm) && s < worst_s) {
        worst_s = s;
        worst = i;
      }
    }
    if (worst < 0) break;
    add({qp.C.row(worst).transpose(), qp.c[worst], false, static_cast<int>(worst)});
  }

  for (std::size_t i = 0; i < active.size(); ++i) {
    const Row& r = active[i];
    if (r.equality) {
      // Sign follows the orientation the row was added with.
      const double sign = r.n.dot(qp.E.row(r.index).transpose()) >= 0.0 ? 1.0 : -1.0;
      res.eq_multipliers[r.index] = sign * u[i];
    } else {
      res.ineq_multipliers[r.index] = u[i];
    }
  }
  return res;
}

void validate(const QpProblem& p) {
  require(p.J.rows() == 6 && p.J.cols() >= 1, "shape_mismatch", "J must be 6 x n");
  require(p.J.allFinite() && p.v_d.allFinite(), "non_finite", "QP inputs contain non-finite values");
  require(p.eps_r > 0.0 && p.eps_p > 0.0, "invalid_qp", "eps_r and eps_p must be positive");
  require(p.null_damping > 0.0, "invalid_qp", "null_damping must be positive");
  const Eigen::Index n = p.J.cols();
  require((p.qdot_lo.size() == 0 || p.qdot_lo.size() == n) && (p.qdot_hi.size() == 0 || p.qdot_hi.size() == n),
          "shape_mismatch", "q̇ bounds must have n entries");
  require(!p.qdot_lo.hasNaN() && !p.qdot_hi.hasNaN(), "non_finite", "q̇ bounds contain NaN");
}

DenseQp to_dense(const QpProblem& p) {
  validate(p);
  const Eigen::Index n = p.J.cols(), nv = n + 2;
  // Residual J q̇ − A α with A = [ω_d 0; 0 v_d].
  Eigen::MatrixXd M(6, nv);
  M.leftCols(n) = p.J;
  M.col(n).setZero();
  M.col(n + 1).setZero();
  M.block(0, n, 3, 1) = -p.v_d.head<3>();
  M.block(3, n + 1, 3, 1) = -p.v_d.tail<3>();

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.J, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double tol = 1e-12 * std::max(1.0, sv.size() ? sv[0] : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > tol) ++rank;
  const Eigen::MatrixXd V0 = svd.matrixV().rightCols(n - rank);

  DenseQp qp;
  qp.G = 2.0 * M.transpose() * M;
  qp.G.topLeftCorner(n, n) += 2.0 * p.null_damping * V0 * V0.transpose();
  qp.G(n, n) += 2.0 * p.eps_r;
  qp.G(n + 1, n + 1) += 2.0 * p.eps_p;
  qp.a = Eigen::VectorXd::Zero(nv);
  qp.a[n] = -2.0 * p.eps_r;
  qp.a[n + 1] = -2.0 * p.eps_p;

  if (p.lock_orientation) {
    qp.E = Eigen::MatrixXd::Zero(3, nv);
    qp.E.leftCols(n) = p.J.topRows(3);
    qp.E.col(n) = -p.v_d.head<3>();
    qp.e = Eigen::VectorXd::Zero(3);
  } else {
    qp.E.resize(0, nv);
    qp.e.resize(0);
  }

  std::vector<std::pair<Eigen::Index, double>> rows;  // (joint, sign·bound) for q̇_j ≥ lo or −q̇_j ≥ −hi
  for (Eigen::Index j = 0; j < p.qdot_lo.size(); ++j)
    if (std::isfinite(p.qdot_lo[j])) rows.push_back({j, p.qdot_lo[j]});
  const std::size_t n_lo = rows.size();
  for (Eigen::Index j = 0; j < p.qdot_hi.size(); ++j)
    if (std::isfinite(p.qdot_hi[j])) rows.push_back({j, p.qdot_hi[j]});
  qp.C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), nv);
  qp.c.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double sign = i < n_lo ? 1.0 : -1.0;
    qp.C(r, rows[i].first) = sign;
    qp.c[r] = sign * rows[i].second;
  }
  return qp;
}

double objective(const QpProblem& p, const Eigen::VectorXd& x) {
  const DenseQp qp = to_dense(p);
  // Constant term ε_r + ε_p restores the written form.
  return 0.5 * x.dot(qp.G * x) + qp.a.dot(x) + p.eps_r + p.eps_p;
}

QpSolution resolved_velocity_solve(const QpProblem& p) {
  const DenseQp qp = to_dense(p);
  const DenseQpResult r = solve_dense_qp(qp);
  const Eigen::Index n = p.J.cols();
  QpSolution s;
  s.qdot = r.x.head(n);
  s.alpha_r = r.x[n];
  s.alpha_p = r.x[n + 1];
  s.objective = 0.5 * r.x.dot(qp.G * r.x) + qp.a.dot(r.x) + p.eps_r + p.eps_p;
  s.iterations = r.iterations;
  return s;
}

void joint_limit_box(const Eigen::VectorXd& q, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                     const Eigen::VectorXd& vel_limit, double dt, Eigen::VectorXd& qdot_lo, Eigen::VectorXd& qdot_hi) {
  require(q.size() == lo.size() && q.size() == hi.size() && q.size() == vel_limit.size(), "shape_mismatch",
          "joint limit vectors must match q");
  require(dt > 0.0, "invalid_argument", "dt must be positive");
  qdot_lo = ((lo - q) / dt).cwiseMax(-vel_limit);
  qdot_hi = ((hi - q) / dt).cwiseMin(vel_limit);
}

}  // namespace flexff::control
