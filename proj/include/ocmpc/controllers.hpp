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

#ifndef OCMPC_CONTROLLERS_HPP_
#define OCMPC_CONTROLLERS_HPP_

#include <Eigen/Core>
#include <vector>

#include "ocmpc/barrier.hpp"
#include "ocmpc/plant.hpp"
#include "ocmpc/traffic.hpp"

namespace ocmpc {

/// Rescales each priority row of f_in so its modem sum matches the
/// realized arrivals; a zero row falls back to a uniform split. The sum
/// is closed exactly by absorbing the rounding residue into the largest
/// entry. Rejects negative inputs.
Eigen::MatrixXd feedback_correction(const Eigen::MatrixXd& f_in,
                                    const Eigen::VectorXd& realized);

/// w(p, m) = k_p / sum_q k_q for every modem.
Eigen::MatrixXd cost_proportional_weights(const SystemConfig& config);

/// Rolls the window one step: blocks tau = 1..H move to 0..H-1, the last
/// block is duplicated, and the tau = 0 queue slice is overwritten with
/// the plant observation.
Eigen::VectorXd warm_shift(const VariableLayout& layout,
                           const Eigen::VectorXd& x,
                           const Eigen::MatrixXd& observed_queues);

/// Blends x toward a strictly interior anchor until every kept slack
/// reaches `margin` (or the anchor is hit). Returns the point and
/// whether any repair was applied.
std::pair<Eigen::VectorXd, bool> restore_interior(const BarrierProblem& problem,
                                                  Eigen::VectorXd x,
                                                  const Eigen::VectorXd& anchor,
                                                  double margin);

struct RoundDiagnostics {
  double cost_incurred = 0.0;    ///< loss cost charged by the plant this step
  double primal_residual = 0.0;  ///< ||Ax - b|| of the stored iterate
  double min_slack = 0.0;        ///< min kept slack of the stored iterate
  double seconds = 0.0;          ///< wall-clock time of the round
  long factorizations = 0;       ///< KKT factorizations this round
  bool repaired = false;         ///< interior restoration triggered
  bool cold_restart = false;     ///< warm start rejected, solved cold
};

struct RoundOutput {
  ControllerDecision decision;
  ObservedState observed;
  RoundDiagnostics diag;
};

/// Online controller: one infeasible-start Newton step per round on the
/// rolling window problem, with proportional feedback correction.
class OcmpcController {
 public:
  /// `initial_forecast` covers the first window (P x (W+1)); the iterate
  /// is initialized by phase one, so round() performs exactly one KKT
  /// factorization.
  OcmpcController(const SystemConfig& config,
                  const Eigen::MatrixXd& initial_forecast,
                  const Eigen::MatrixXd& init_queues,
                  const Eigen::MatrixXd& init_w,
                  KktKernel kernel = KktKernel::kSparse);

  /// `forecast` is P x (W+2): expectations 0..W+1 steps ahead from the
  /// current traffic state. Columns 1..W+1 parameterize the next window.
  RoundOutput round(const Eigen::MatrixXd& forecast,
                    const Eigen::VectorXd& realized, Plant& plant);

  const Eigen::VectorXd& iterate() const { return x_; }
  BarrierProblem& problem() { return problem_; }
  const Eigen::MatrixXd& implemented_w() const { return prev_w_; }

 private:
  SystemConfig cfg_;
  VariableLayout layout_;
  BarrierProblem problem_;
  Eigen::VectorXd x_;
  Eigen::MatrixXd prev_w_;
};

/// Benchmark controller: the same rolling window solved to optimality
/// every round (barrier path, warm started from the shifted previous
/// solution with a cold fallback).
class MpcController {
 public:
  MpcController(const SystemConfig& config, const Eigen::MatrixXd& init_queues,
                const Eigen::MatrixXd& init_w,
                KktKernel kernel = KktKernel::kSparse, double gap_tol = 1e-6);

  /// `forecast` is P x (W+1): the current window demand.
  RoundOutput round(const Eigen::MatrixXd& forecast,
                    const Eigen::VectorXd& realized, Plant& plant);

  BarrierProblem& problem() { return problem_; }

 private:
  SystemConfig cfg_;
  VariableLayout layout_;
  BarrierProblem problem_;
  Eigen::MatrixXd prev_w_;
  Eigen::VectorXd x_prev_;
  double eta_prev_ = 0.0;
  bool have_solution_ = false;
  double gap_tol_;
};

/// Full-horizon optimum with the realized arrivals known in advance and
/// the terminal occupancy pinned back to Q0.
struct BatchResult {
  std::vector<ControllerDecision> decisions;  ///< one per step, 0..T-1
  double objective = 0.0;                     ///< model optimum (cost units)
  double eta_final = 0.0;
  double gap_bound = 0.0;
  double solve_seconds = 0.0;
};
BatchResult batch_hindsight(const SystemConfig& config,
                            const TrafficTrace& trace,
                            const Eigen::MatrixXd& init_w,
                            KktKernel kernel = KktKernel::kSparse,
                            double tol = 1e-6);

/// Rule-based benchmark: static cost-proportional weights, uniform
/// inflow split (the correction is then a no-op by construction).
class ProportionalController {
 public:
  explicit ProportionalController(const SystemConfig& config);
  RoundOutput round(const Eigen::VectorXd& realized, Plant& plant);
  const Eigen::MatrixXd& weights() const { return w_; }

 private:
  SystemConfig cfg_;
  Eigen::MatrixXd w_;
};

}  // namespace ocmpc

#endif  // OCMPC_CONTROLLERS_HPP_
