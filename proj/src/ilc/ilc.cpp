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

#include "flexff/ilc/ilc.hpp"

#include <cmath>
#include <limits>

namespace flexff::ilc {
namespace {

void check_lengths(const nn::RecurrentModel& model, const Trajectory& u) {
  const int T = model.topology().window;
  require(u.n_joints() == model.topology().n_joints, "shape_mismatch",
          "trajectory joint count does not match the model");
  require(u.length() > T, "sequence_too_short",
          "ILC needs more than T = " + std::to_string(T) + " samples, got " + std::to_string(u.length()));
}

void check_pair(const Trajectory& u, const Trajectory& q_d) {
  require(u.n_joints() == q_d.n_joints() && u.length() == q_d.length(), "shape_mismatch",
          "u and q_d must have equal shape");
}

struct Clamp {
  const IlcConfig& config;

  bool active() const {
    return config.clamp_to_limits && config.joint_limits_lo.size() > 0 && config.joint_limits_hi.size() > 0;
  }

  Eigen::MatrixXd operator()(Eigen::MatrixXd u) const {
    if (!active()) return u;
    require(config.joint_limits_lo.size() == u.rows() && config.joint_limits_hi.size() == u.rows(),
            "shape_mismatch", "ILC joint limits must have one entry per joint");
    for (Eigen::Index j = 0; j < u.rows(); ++j)
      u.row(j) = u.row(j).cwiseMax(config.joint_limits_lo[j]).cwiseMin(config.joint_limits_hi[j]);
    return u;
  }
};

// Gradient with respect to u from an n × (N - T) cotangent over the rollout.
Eigen::MatrixXd rollout_vjp(const nn::RecurrentModel& model, const Eigen::MatrixXd& u, const Eigen::MatrixXd& cot) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(u.rows(), u.cols());
  g.leftCols(u.cols() - 1) = nn::sliding_vjp(model, u.leftCols(u.cols() - 1), cot);
  return g;
}

bool converged(const std::vector<double>& history, const IlcConfig& c) {
  const auto w = static_cast<std::size_t>(c.convergence_window);
  if (history.size() <= w) return false;
  const double before = history[history.size() - 1 - w];
  return before > 0.0 && (before - history.back()) / before < c.convergence_tol;
}

// Shared descent loop. `residual_at` maps an input to its residual over
// T .. N-1; `direction` maps (u, residual) to the descent gradient.
template <typename ResidualAt, typename Direction>
IlcState descend(Trajectory u0, const Trajectory& q_d, int T, const IlcConfig& config, ResidualAt&& residual_at,
                 Direction&& direction) {
  const Clamp clamp{config};
  IlcState st;
  st.u = std::move(u0);
  Eigen::MatrixXd r = residual_at(st.u.data);
  double err = r.norm();
  st.error_history.push_back(err);
  for (;;) {
    if (err == 0.0) {
      st.stop = IlcStop::kZeroError;
      break;
    }
    if (st.iter >= config.max_iters) {
      st.stop = IlcStop::kMaxIters;
      break;
    }
    Eigen::MatrixXd g = direction(st.u.data, r);
    g.leftCols(T).setZero();
    if (g.isZero(0.0)) {
      st.stop = IlcStop::kNoDescent;
      break;
    }
    const Eigen::MatrixXd u = st.u.data;
    const auto candidate = [&](double alpha) { return clamp(u - alpha * g); };
    const LineSearchResult ls =
        line_search([&](double alpha) { return residual_at(candidate(alpha)); }, r, g, config);
    if (ls.converged) {
      st.stop = IlcStop::kNoDescent;
      break;
    }
    st.u.data = candidate(ls.alpha);
    st.alpha = ls.alpha;
    ++st.iter;
    r = residual_at(st.u.data);
    err = r.norm();
    st.error_history.push_back(err);
    if (converged(st.error_history, config)) {
      st.stop = IlcStop::kConverged;
      break;
    }
  }
  st.e_q = Trajectory(r, q_d.sample_rate);
  return st;
}

}  // namespace

void validate(const IlcConfig& c) {
  require(c.max_iters >= 1, "invalid_config", "ilc max_iters must be >= 1");
  require(c.convergence_tol > 0.0, "invalid_config", "ilc convergence_tol must be > 0");
  require(c.convergence_window >= 1, "invalid_config", "ilc convergence_window must be >= 1");
  require(c.grid_min_exp <= c.grid_max_exp, "invalid_config", "ilc grid exponents require min <= max");
  require(c.golden_iters >= 0, "invalid_config", "ilc golden_iters must be >= 0");
}

std::string to_string(IlcStop stop) {
  switch (stop) {
    case IlcStop::kMaxIters: return "max_iters";
    case IlcStop::kConverged: return "converged";
    case IlcStop::kNoDescent: return "no_descent";
    case IlcStop::kZeroError: return "zero_error";
  }
  return "unknown";
}

Trajectory predict_rollout(const nn::RecurrentModel& model, const Trajectory& u) {
  check_lengths(model, u);
  return Trajectory(nn::predict_sliding(model, u.data.leftCols(u.length() - 1)), u.sample_rate);
}

double rollout_error(const Trajectory& rollout, const Trajectory& q_d) {
  const Eigen::Index m = rollout.length();
  require(q_d.length() > m && q_d.n_joints() == rollout.n_joints(), "shape_mismatch",
          "rollout does not fit q_d");
  return (rollout.data - q_d.data.rightCols(m)).norm();
}

Trajectory ilc_gradient(const nn::RecurrentModel& model, const Trajectory& u, const Trajectory& q_d) {
  check_lengths(model, u);
  check_pair(u, q_d);
  const Trajectory pred = predict_rollout(model, u);
  const Eigen::MatrixXd e = pred.data - q_d.data.rightCols(pred.length());
  return Trajectory(rollout_vjp(model, u.data, e), u.sample_rate);
}

LineSearchResult line_search(const Residual& residual, const Eigen::MatrixXd& r0, const Eigen::MatrixXd& grad,
                             const IlcConfig& config) {
  validate(config);
  LineSearchResult best{0.0, r0.norm(), false};
  const double gmax = grad.cwiseAbs().maxCoeff();
  if (best.error == 0.0 || gmax == 0.0) {
    best.converged = true;
    return best;
  }
  // Gauss–Newton step from a secant estimate of J·g.
  const double probe = 1e-4 / gmax;
  const Eigen::MatrixXd jg = (r0 - residual(probe)) / probe;
  const double jg2 = jg.squaredNorm();
  // Minimiser of ‖r0 − α J g‖ along the direction; for an exact gradient the
  // numerator equals gᵀg.
  const double slope = (jg.array() * r0.array()).sum();
  if (!(jg2 > 0.0) || !std::isfinite(jg2) || !(slope > 0.0)) {
    best.converged = true;
    return best;
  }
  const double alpha_ref = slope / jg2;

  const int count = config.grid_max_exp - config.grid_min_exp + 1;
  std::vector<double> alphas(static_cast<std::size_t>(count)), errors(alphas.size());
  std::size_t best_i = 0;
  for (int i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    alphas[k] = std::ldexp(alpha_ref, config.grid_min_exp + i);
    errors[k] = residual(alphas[k]).norm();
    if (errors[k] < errors[best_i]) best_i = k;
  }
  if (errors[best_i] < best.error) best = {alphas[best_i], errors[best_i], false};

  // Golden-section refinement inside the neighbouring grid points.
  double lo = best_i > 0 ? alphas[best_i - 1] : 0.0;
  double hi = best_i + 1 < alphas.size() ? alphas[best_i + 1] : alphas[best_i];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
  double fc = residual(c).norm(), fd = residual(d).norm();
  for (int it = 0; it < config.golden_iters; ++it) {
    if (fc < best.error) best = {c, fc, false};
    if (fd < best.error) best = {d, fd, false};
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = residual(c).norm();
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = residual(d).norm();
    }
  }
  if (fc < best.error) best = {c, fc, false};
  if (fd < best.error) best = {d, fd, false};
  best.converged = best.alpha == 0.0;
  return best;
}

LineSearchResult line_search(const nn::RecurrentModel& model, const Trajectory& u, const Trajectory& grad,
                             const Trajectory& q_d, const IlcConfig& config) {
  check_lengths(model, u);
  check_pair(u, q_d);
  check_pair(grad, q_d);
  const Clamp clamp{config};
  const Eigen::Index m = u.length() - model.topology().window;
  const auto residual = [&](double alpha) -> Eigen::MatrixXd {
    const Eigen::MatrixXd cand = clamp(u.data - alpha * grad.data);
    return nn::predict_sliding(model, cand.leftCols(cand.cols() - 1)) - q_d.data.rightCols(m);
  };
  return line_search(residual, residual(0.0), grad.data, config);
}

IlcState ilc_refine(const nn::RecurrentModel& model, const Trajectory& q_d, const IlcConfig& config) {
  validate(config);
  check_lengths(model, q_d);
  const int T = model.topology().window;
  const Eigen::Index m = q_d.length() - T;
  const auto residual_at = [&](const Eigen::MatrixXd& u) -> Eigen::MatrixXd {
    return nn::predict_sliding(model, u.leftCols(u.cols() - 1)) - q_d.data.rightCols(m);
  };
  const auto direction = [&](const Eigen::MatrixXd& u, const Eigen::MatrixXd& r) { return rollout_vjp(model, u, r); };
  return descend(q_d, q_d, T, config, residual_at, direction);
}

IlcState ilc_on_plant(const PlantConfig& plant, const nn::RecurrentModel& model, const Trajectory& q_d,
                      const Trajectory& u0, const IlcConfig& config) {
  validate(config);
  check_lengths(model, q_d);
  check_pair(u0, q_d);
  const int T = model.topology().window;
  const Eigen::Index m = q_d.length() - T;
  const auto residual_at = [&](const Eigen::MatrixXd& u) -> Eigen::MatrixXd {
    return simulate(plant, Trajectory(u, q_d.sample_rate)).data.rightCols(m) - q_d.data.rightCols(m);
  };
  const auto direction = [&](const Eigen::MatrixXd& u, const Eigen::MatrixXd& r) { return rollout_vjp(model, u, r); };
  return descend(u0, q_d, T, config, residual_at, direction);
}

}  // namespace flexff::ilc
