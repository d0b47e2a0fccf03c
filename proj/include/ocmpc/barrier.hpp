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

#ifndef OCMPC_BARRIER_HPP_
#define OCMPC_BARRIER_HPP_

#include <Eigen/Core>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "ocmpc/linalg.hpp"
#include "ocmpc/model.hpp"

namespace ocmpc {

/// Linear-algebra route for the saddle solves. The sparse route is the
/// default; the dense route runs through the pivoted symmetric-indefinite
/// factorization and exists for small problems and cross-checks.
enum class KktKernel { kSparse, kDense };

/// Barrier subproblem state for one stacked problem.
///
/// Construction classifies the inequality rows: a row whose left-hand
/// side lies in the row space of A has constant slack on the manifold
/// {Ax = b}. Constant-zero rows (e.g. -Q <= 0 at a pinned-empty queue,
/// or w <= 1 under a single priority) would put every feasible point on
/// the boundary, so they are excluded from the barrier; constant-negative
/// rows certify infeasibility. Row classification is refreshed whenever
/// b changes. The excluded rows are implied by the equalities, so the
/// feasible set is untouched.
class BarrierProblem {
 public:
  BarrierProblem(StackedProblem stacked, double eta,
                 KktKernel kernel = KktKernel::kSparse, bool presolve = true);

  const StackedProblem& stacked() const { return sp_; }
  double eta() const { return eta_; }
  void set_eta(double eta);

  /// Replaces the time-varying data and reclassifies rows. Throws
  /// InfeasibleError when an equality-implied row constant is negative.
  void update_rhs(const Eigen::VectorXd& b, const Eigen::VectorXd& d);
  void update_b(const Eigen::VectorXd& b);

  const Eigen::VectorXd& b() const { return sp_.b; }
  const Eigen::VectorXd& d() const { return sp_.d; }

  const std::vector<char>& kept() const { return kept_; }
  long kept_count() const { return kept_count_; }

  /// Slacks d - Cx with excluded rows reported as +inf.
  Eigen::VectorXd slacks(const Eigen::VectorXd& x) const;
  double min_slack(const Eigen::VectorXd& x) const;

  /// eta c'x - sum log s_i over kept rows; throws NotInteriorError.
  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;

  KktKernel kernel() const { return kernel_; }
  KktSolver& kkt();
  /// Factorizations performed through this problem (sparse + dense).
  long factorizations() const;

  // Solver internals shared by the free functions below. `weights` are
  // the Hessian row multipliers 1/s_i^2 (0 on excluded rows).
  Eigen::VectorXd hessian_weights(const Eigen::VectorXd& slacks) const;
  Eigen::VectorXd solve_kkt(const Eigen::VectorXd& weights,
                            const Eigen::VectorXd& rhs);

 private:
  void build_span_catalog_();
  void build_span_algebraic_();
  void classify_();

  StackedProblem sp_;
  double eta_;
  KktKernel kernel_;
  bool presolve_;
  // rows with C_i in rowspan(A): combination indices into eq rows
  std::vector<std::vector<std::pair<long, double>>> span_combo_;
  std::vector<char> in_span_;
  std::vector<char> kept_;
  long kept_count_ = 0;
  std::unique_ptr<KktSolver> kkt_;
  long dense_factorizations_ = 0;
};

/// Value, gradient and (dense) Hessian of eta c'x - sum_i log(d_i - C_i x)
/// over ALL inequality rows. Throws NotInteriorError naming the first
/// violated row. This is the plain mathematical object; solvers work
/// through BarrierProblem, which may exclude equality-implied rows.
struct BarrierEval {
  double value;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // empty unless requested
};
BarrierEval barrier_eval(const Eigen::VectorXd& x, const StackedProblem& sp,
                         double eta, bool with_hessian = false);

/// Hessian-vector product of the all-rows barrier at x (no dense Hessian
/// materialization); used by derivative checks at full scale.
Eigen::VectorXd barrier_hessian_product(const Eigen::VectorXd& x,
                                        const StackedProblem& sp,
                                        const Eigen::VectorXd& v);

/// One infeasible-start Newton step on the saddle system
///   [ H  A' ] [u]   [ grad d_eta(x) ]
///   [ A  0  ] [w] = [ A x - b       ]
/// applied as x_next = x + alpha * (-u) with the fraction-to-boundary
/// rule alpha = min(1, 0.99 * max step keeping all kept slacks positive).
struct StepResult {
  Eigen::VectorXd x_next;
  Eigen::VectorXd dual;      ///< new equality multiplier estimate (-w)
  double primal_residual;    ///< ||A x_next - b||
  double newton_decrement;   ///< sqrt(u' H u)
  double alpha;              ///< applied step fraction
  double min_slack;          ///< min kept slack at x_next
  double residual_scaled;    ///< scaled KKT residual at (x_next, dual)
};
StepResult newton_kkt_step(const Eigen::VectorXd& x, BarrierProblem& problem,
                           const Eigen::VectorXd& b);

/// Scaled KKT residual used for termination checks:
///   max( ||eta c + grad phi + A' nu|| / max(1, eta ||c||),
///        ||A x - b|| / max(1, ||b||) ).
double kkt_residual_scaled(const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                           BarrierProblem& problem);

/// Damped infeasible-start Newton to the centering optimum at the
/// problem's current eta: stops when the scaled primal residual and the
/// scaled Newton decrement fall below tol, and the raw decrement below
/// decrement_cap. The cap matters on the barrier path: the duality-gap
/// certificate m/eta only holds near the exact central point, and the
/// scaled test alone grows slack as eta grows. Deterministic.
struct CenteringResult {
  Eigen::VectorXd x;
  Eigen::VectorXd dual;
  int iterations = 0;
  double primal_residual = 0.0;
  double newton_decrement = 0.0;
};
CenteringResult solve_centering(
    BarrierProblem& problem, const Eigen::VectorXd& x0,
    const Eigen::VectorXd& b, double tol, int max_iter = 200,
    double decrement_cap = std::numeric_limits<double>::infinity());

/// Barrier path for the LP min c'x s.t. Ax = b, Cx <= d: repeats
/// centering with eta <- mu * eta until the duality-gap bound
/// m_kept / eta drops below tol * (1 + |c'x|). Needs no interior input;
/// phase one supplies the start.
struct PathResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double eta_final = 0.0;
  double gap_bound = 0.0;
  int centerings = 0;
};
PathResult solve_to_optimality(const StackedProblem& sp,
                               const Eigen::VectorXd& b, double mu = 20.0,
                               double eta0 = 10.0, double tol = 1e-6,
                               KktKernel kernel = KktKernel::kSparse);

/// Strictly interior point with Ax = b (within 1e-8 relative).
///
/// Routing-shaped problems start from the hold-everything anchor read
/// off the row census plus one centering pass; anything else (or an
/// anchor that fails) goes through an auxiliary max-min-slack barrier
/// solve, which also certifies infeasibility: if the best achievable
/// minimum slack is not positive an InfeasibleError carrying it is
/// thrown. The returned point has min slack >= margin when that is
/// achievable, otherwise at least half the best achievable slack.
Eigen::VectorXd phase_one(const StackedProblem& sp, const Eigen::VectorXd& b,
                          double margin = 1e-3,
                          KktKernel kernel = KktKernel::kSparse,
                          const Eigen::VectorXd* anchor_hint = nullptr);

}  // namespace ocmpc

#endif  // OCMPC_BARRIER_HPP_
