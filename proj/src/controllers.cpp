// Copyright 2026 the ocmpc authors
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

#include "ocmpc/controllers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace ocmpc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd extract_slot0(const VariableLayout& layout,
                              const Eigen::VectorXd& x, Var family) {
  Eigen::MatrixXd out(layout.priorities(), layout.modems());
  for (int m = 0; m < layout.modems(); ++m)
    for (int p = 0; p < layout.priorities(); ++p)
      out(p, m) = x[layout.index(family, p, m, 0)];
  return out;
}

// Barrier path continuation from an interior point at the problem's
// current eta; shared by the cold and warm-started solvers.
PathResult continue_path(BarrierProblem& problem, Eigen::VectorXd x,
                         const Eigen::VectorXd& b, double mu, double tol) {
  PathResult out;
  double eta = problem.eta();
  const double cap = 0.1 * std::sqrt(std::max<double>(1, problem.kept_count()));
  for (int stage = 0; stage < 64; ++stage) {
    problem.set_eta(eta);
    const CenteringResult center =
        solve_centering(problem, x, b, 1e-8, 200, cap);
    x = center.x;
    ++out.centerings;
    const double objective = problem.stacked().c.dot(x);
    const double gap = problem.kept_count() / eta;
    if (gap <= tol * (1.0 + std::abs(objective))) {
      out.x = std::move(x);
      out.objective = objective;
      out.eta_final = eta;
      out.gap_bound = gap;
      return out;
    }
    eta *= mu;
  }
  throw IterationLimitError("barrier path failed to close the duality gap",
                            (problem.stacked().A * x - b).norm(), 0.0);
}

}  // namespace

Eigen::MatrixXd feedback_correction(const Eigen::MatrixXd& f_in,
                                    const Eigen::VectorXd& realized) {
  if (f_in.rows() != realized.size())
    throw DimensionError("f_in rows must match realized arrivals");
  if ((f_in.array() < -1e-12).any())
    throw DimensionError("feedback correction rejects negative inflow");
  if ((realized.array() < 0.0).any())
    throw DimensionError("feedback correction rejects negative arrivals");

  const int P = static_cast<int>(f_in.rows());
  const int M = static_cast<int>(f_in.cols());
  Eigen::MatrixXd out(P, M);
  for (int p = 0; p < P; ++p) {
    const double row_sum = f_in.row(p).sum();
    if (row_sum > 0.0) {
      const double scale = realized[p] / row_sum;
      for (int m = 0; m < M; ++m) out(p, m) = f_in(p, m) * scale;
    } else {
      out.row(p).setConstant(realized[p] / M);
    }
    // Close the modem sum exactly on the largest entry (it has the
    // finest ulp relative to the sum): rewrite it as the residual of
    // the others, then walk single ulps until the recomputed sum lands
    // on the target bit for bit.
    int m_star = 0;
    for (int m = 1; m < M; ++m)
      if (out(p, m) > out(p, m_star)) m_star = m;
    double others = 0.0;
    for (int m = 0; m < M; ++m)
      if (m != m_star) others += out(p, m);
    out(p, m_star) = realized[p] - others;
    for (int probe = 0; probe < 64; ++probe) {
      const double diff = realized[p] - out.row(p).sum();
      if (diff == 0.0) break;
      out(p, m_star) = std::nextafter(
          out(p, m_star),
          diff > 0.0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity());
    }
  }
  return out;
}

Eigen::MatrixXd cost_proportional_weights(const SystemConfig& config) {
  config.validate();
  Eigen::MatrixXd w(config.P, config.M);
  const double total = config.k.sum();
  for (int m = 0; m < config.M; ++m)
    for (int p = 0; p < config.P; ++p) w(p, m) = config.k[p] / total;
  return w;
}

Eigen::VectorXd warm_shift(const VariableLayout& layout,
                           const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& observed_queues) {
  if (x.size() != layout.size()) throw DimensionError("iterate size mismatch");
  const int H = layout.horizon();
  Eigen::VectorXd out(layout.size());
  for (int f = 0; f < kNumVarFamilies; ++f)
    for (int tau = 0; tau <= H; ++tau) {
      const int src = std::min(tau + 1, H);
      for (int m = 0; m < layout.modems(); ++m)
        for (int p = 0; p < layout.priorities(); ++p)
          out[layout.index(static_cast<Var>(f), p, m, tau)] =
              x[layout.index(static_cast<Var>(f), p, m, src)];
    }
  for (int m = 0; m < layout.modems(); ++m)
    for (int p = 0; p < layout.priorities(); ++p)
      out[layout.index(Var::kQueue, p, m, 0)] = observed_queues(p, m);
  return out;
}

std::pair<Eigen::VectorXd, bool> restore_interior(
    const BarrierProblem& problem, Eigen::VectorXd x,
    const Eigen::VectorXd& anchor, double margin) {
  const Eigen::VectorXd s_x = problem.slacks(x);
  if (s_x.minCoeff() >= margin) return {std::move(x), false};
  const Eigen::VectorXd s_a = problem.slacks(anchor);
  double theta = 0.0;
  for (long i = 0; i < s_x.size(); ++i) {
    if (!problem.kept()[i] || s_x[i] >= margin) continue;
    if (s_a[i] > s_x[i]) {
      const double needed =
          (std::min(margin, 0.5 * (s_a[i] + s_x[i])) - s_x[i]) /
          (s_a[i] - s_x[i]);
      theta = std::max(theta, std::min(needed, 1.0));
    } else {
      theta = 1.0;  // anchor no better on this row; take it outright
    }
  }
  x = (1.0 - theta) * x + theta * anchor;
  return {std::move(x), true};
}

OcmpcController::OcmpcController(const SystemConfig& config,
                                 const Eigen::MatrixXd& initial_forecast,
                                 const Eigen::MatrixXd& init_queues,
                                 const Eigen::MatrixXd& init_w,
                                 KktKernel kernel)
    : cfg_(config),
      layout_(build_layout(config)),
      problem_(build_stacked(config, layout_, init_queues, initial_forecast,
                             init_w, TerminalMode::kFree),
               config.eta, kernel),
      prev_w_(init_w) {
  const Eigen::VectorXd anchor = interior_anchor(
      cfg_, layout_, init_queues, initial_forecast, init_w);
  x_ = phase_one(problem_.stacked(), problem_.b(), 1e-3, kernel, &anchor);
}

RoundOutput OcmpcController::round(const Eigen::MatrixXd& forecast,
                                   const Eigen::VectorXd& realized,
                                   Plant& plant) {
  const auto t0 = Clock::now();
  if (forecast.rows() != cfg_.P || forecast.cols() != cfg_.W + 2)
    throw DimensionError("ocmpc round expects a P x (W+2) forecast");

  RoundOutput out;
  out.decision.w = extract_slot0(layout_, x_, Var::kWeight);
  out.decision.f_in =
      feedback_correction(extract_slot0(layout_, x_, Var::kFlowIn), realized);

  const double cost_before = plant.cumulative_loss_cost();
  out.observed = plant.apply(out.decision, realized);
  out.diag.cost_incurred = plant.cumulative_loss_cost() - cost_before;

  // Next window data: demand shifts one step into the forecast, queue
  // pins come from the observation, the tau=0 ramp box re-centers on the
  // implemented weights.
  const Eigen::MatrixXd demand_next = forecast.rightCols(cfg_.W + 1);
  const Eigen::VectorXd b_next = equality_rhs(problem_.stacked().eq_rows, cfg_,
                                              out.observed.Q, demand_next);
  const Eigen::VectorXd d_next = inequality_rhs(problem_.stacked().ineq_rows,
                                                cfg_, out.decision.w);
  problem_.update_rhs(b_next, d_next);

  Eigen::VectorXd x_shift = warm_shift(layout_, x_, out.observed.Q);
  const Eigen::VectorXd anchor = interior_anchor(
      cfg_, layout_, out.observed.Q, demand_next, out.decision.w);
  auto [x_repaired, repaired] =
      restore_interior(problem_, std::move(x_shift), anchor, 1e-6);
  out.diag.repaired = repaired;

  const long fact_before = problem_.factorizations();
  const StepResult step = newton_kkt_step(x_repaired, problem_, b_next);
  out.diag.factorizations = problem_.factorizations() - fact_before;

  x_ = step.x_next;
  prev_w_ = out.decision.w;
  out.diag.primal_residual = step.primal_residual;
  out.diag.min_slack = step.min_slack;
  out.diag.seconds = seconds_since(t0);
  return out;
}

MpcController::MpcController(const SystemConfig& config,
                             const Eigen::MatrixXd& init_queues,
                             const Eigen::MatrixXd& init_w, KktKernel kernel,
                             double gap_tol)
    : cfg_(config),
      layout_(build_layout(config)),
      problem_(build_stacked(config, layout_,
                             init_queues,
                             Eigen::MatrixXd::Ones(config.P, config.W + 1),
                             init_w, TerminalMode::kFree),
               10.0, kernel),
      prev_w_(init_w),
      gap_tol_(gap_tol) {}

RoundOutput MpcController::round(const Eigen::MatrixXd& forecast,
                                 const Eigen::VectorXd& realized,
                                 Plant& plant) {
  const auto t0 = Clock::now();
  if (forecast.rows() != cfg_.P || forecast.cols() != cfg_.W + 1)
    throw DimensionError("mpc round expects a P x (W+1) forecast");

  const Eigen::MatrixXd queues = plant.queues();
  const Eigen::VectorXd b =
      equality_rhs(problem_.stacked().eq_rows, cfg_, queues, forecast);
  const Eigen::VectorXd d =
      inequality_rhs(problem_.stacked().ineq_rows, cfg_, prev_w_);
  problem_.update_rhs(b, d);

  RoundOutput out;
  const long fact_before = problem_.factorizations();
  PathResult path;
  bool solved = false;
  if (have_solution_) {
    try {
      Eigen::VectorXd x0 = warm_shift(layout_, x_prev_, queues);
      const Eigen::VectorXd anchor =
          interior_anchor(cfg_, layout_, queues, forecast, prev_w_);
      auto [x_repaired, repaired] =
          restore_interior(problem_, std::move(x0), anchor, 1e-9);
      out.diag.repaired = repaired;
      if (problem_.min_slack(x_repaired) <= 0.0)
        throw NotInteriorError("warm start left the interior", -1, 0.0);
      problem_.set_eta(std::max(10.0, eta_prev_));
      path = continue_path(problem_, std::move(x_repaired), b, 20.0, gap_tol_);
      solved = true;
    } catch (const Error&) {
      solved = false;
    }
  }
  if (!solved) {
    out.diag.cold_restart = have_solution_;
    const Eigen::VectorXd x0 = phase_one(problem_.stacked(), b, 1e-3,
                                         problem_.kernel());
    problem_.set_eta(10.0);
    path = continue_path(problem_, x0, b, 20.0, gap_tol_);
  }
  out.diag.factorizations = problem_.factorizations() - fact_before;

  out.decision.w = extract_slot0(layout_, path.x, Var::kWeight);
  out.decision.f_in = feedback_correction(
      extract_slot0(layout_, path.x, Var::kFlowIn), realized);

  const double cost_before = plant.cumulative_loss_cost();
  out.observed = plant.apply(out.decision, realized);
  out.diag.cost_incurred = plant.cumulative_loss_cost() - cost_before;

  x_prev_ = path.x;
  eta_prev_ = path.eta_final;
  have_solution_ = true;
  prev_w_ = out.decision.w;
  out.diag.primal_residual =
      (problem_.stacked().A * x_prev_ - b).norm();
  out.diag.min_slack = problem_.min_slack(x_prev_);
  out.diag.seconds = seconds_since(t0);
  return out;
}

BatchResult batch_hindsight(const SystemConfig& config,
                            const TrafficTrace& trace,
                            const Eigen::MatrixXd& init_w, KktKernel kernel,
                            double tol) {
  const auto t0 = Clock::now();
  const int T = static_cast<int>(trace.states.size());
  if (T != config.T)
    throw DimensionError("trace length must equal the configured horizon");
  VariableLayout layout(config.P, config.M, T - 1);
  const Eigen::MatrixXd demand = trace.arrivals.transpose();
  const Eigen::MatrixXd init_queues =
      Eigen::MatrixXd::Constant(config.P, config.M, config.Q0);
  const StackedProblem sp =
      build_stacked(config, layout, init_queues, demand, init_w,
                    TerminalMode::kPinned);

  const PathResult path = solve_to_optimality(sp, sp.b, 20.0, 10.0, tol,
                                              kernel);

  BatchResult out;
  out.objective = path.objective;
  out.eta_final = path.eta_final;
  out.gap_bound = path.gap_bound;
  out.decisions.reserve(T);
  for (int t = 0; t < T; ++t) {
    ControllerDecision dec;
    dec.w.resize(config.P, config.M);
    dec.f_in.resize(config.P, config.M);
    for (int m = 0; m < config.M; ++m)
      for (int p = 0; p < config.P; ++p) {
        dec.w(p, m) = path.x[layout.index(Var::kWeight, p, m, t)];
        dec.f_in(p, m) = path.x[layout.index(Var::kFlowIn, p, m, t)];
      }
    out.decisions.push_back(std::move(dec));
  }
  out.solve_seconds = seconds_since(t0);
  return out;
}

ProportionalController::ProportionalController(const SystemConfig& config)
    : cfg_(config), w_(cost_proportional_weights(config)) {}

RoundOutput ProportionalController::round(const Eigen::VectorXd& realized,
                                          Plant& plant) {
  const auto t0 = Clock::now();
  RoundOutput out;
  out.decision.w = w_;
  out.decision.f_in = feedback_correction(
      Eigen::MatrixXd::Zero(cfg_.P, cfg_.M), realized);  // uniform split
  const double cost_before = plant.cumulative_loss_cost();
  out.observed = plant.apply(out.decision, realized);
  out.diag.cost_incurred = plant.cumulative_loss_cost() - cost_before;
  out.diag.seconds = seconds_since(t0);
  return out;
}

}  // namespace ocmpc
