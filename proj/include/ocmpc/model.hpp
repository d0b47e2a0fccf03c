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

#ifndef OCMPC_MODEL_HPP_
#define OCMPC_MODEL_HPP_

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <vector>

#include "ocmpc/config.hpp"
#include "ocmpc/layout.hpp"

namespace ocmpc {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Equality-row census. One tag per matrix row; indices are 0-based and
/// unused coordinates are -1.
enum class EqKind : int {
  kBalance,        // f_in - f_out - dQ - loss = 0, per (p,m,tau)
  kWeightSimplex,  // sum_p w = 1, per (m,tau)
  kDemandMatch,    // sum_m f_in = demand, per (p,tau)
  kQueueChain,     // Q(tau+1) - Q(tau) - dQ(tau) = 0, per (p,m,tau<H)
  kQueueInit,      // Q(tau=0) = observed, per (p,m)
  kQueueTerminal   // Q(tau=H) = Q0, per (p,m); pinned mode only
};
struct EqRow {
  EqKind kind;
  int p = -1, m = -1, tau = -1;
};

/// Inequality-row census; the absolute-value ramp bound is split into
/// its two linearizations.
enum class IneqKind : int {
  kWeightUpper,    //  w <= 1
  kWeightLower,    // -w <= 0
  kRampUpper,      //  w(tau) - w(tau-1) <= dw_bar   (tau=0 against prev_w)
  kRampLower,      // -w(tau) + w(tau-1) <= dw_bar   (tau=0 against prev_w)
  kServiceCap,     //  f_out - w/ds <= 0
  kQueueCapacity,  //  sum_p Q <= Q_bar, per (m,tau)
  kBandwidthCap,   //  sum_p f_out <= C_bar, per (m,tau)
  kFlowInLower,    // -f_in <= 0
  kFlowOutLower,   // -f_out <= 0
  kLossLower,      // -loss <= 0
  kQueueLower      // -Q <= 0
};
struct IneqRow {
  IneqKind kind;
  int p = -1, m = -1, tau = -1;
};

/// Whether the last time block carries the Q(tau=H) = Q0 pin. Rolling
/// windows run free; only the full-horizon batch problem pins.
enum class TerminalMode { kFree, kPinned };

struct EqualitySystem {
  SpMat A;
  Eigen::VectorXd b;
  std::vector<EqRow> rows;
};

struct InequalitySystem {
  SpMat C;
  Eigen::VectorXd d;
  std::vector<IneqRow> rows;
};

/// The matrix form min c'x s.t. Ax = b, Cx <= d of one window position.
/// For a fixed config, A and C are round-invariant; only b and the
/// tau=0 ramp entries of d change between rounds.
struct StackedProblem {
  VariableLayout layout;
  Eigen::VectorXd c;
  SpMat A;
  Eigen::VectorXd b;
  std::vector<EqRow> eq_rows;
  SpMat C;
  Eigen::VectorXd d;
  std::vector<IneqRow> ineq_rows;
};

/// Layout over the controller window (H = config.W).
VariableLayout build_layout(const SystemConfig& config);

/// c[i] = k_p at every loss index, 0 elsewhere.
Eigen::VectorXd build_cost(const SystemConfig& config,
                           const VariableLayout& layout);

/// Builds the equality system for one window position.
///
/// `observed_queues` is P x M (packets at the window start), `demand` is
/// P x (H+1) expected arrivals per step. Throws DimensionError on shape
/// mismatch and ConfigError on out-of-range data.
EqualitySystem build_equalities(const SystemConfig& config,
                                const VariableLayout& layout,
                                const Eigen::MatrixXd& observed_queues,
                                const Eigen::MatrixXd& demand,
                                TerminalMode mode);

/// Recomputes only b for an existing (possibly row-eliminated) system.
Eigen::VectorXd equality_rhs(const std::vector<EqRow>& rows,
                             const SystemConfig& config,
                             const Eigen::MatrixXd& observed_queues,
                             const Eigen::MatrixXd& demand);

/// Builds the inequality system; `prev_w` (P x M, entries in [0,1]) sets
/// the tau=0 ramp bounds.
InequalitySystem build_inequalities(const SystemConfig& config,
                                    const VariableLayout& layout,
                                    const Eigen::MatrixXd& prev_w);

/// Recomputes only d (the tau=0 ramp entries are the time-varying part).
Eigen::VectorXd inequality_rhs(const std::vector<IneqRow>& rows,
                               const SystemConfig& config,
                               const Eigen::MatrixXd& prev_w);

/// Drops equality rows that are linearly dependent on earlier rows
/// (lowest row index kept) and returns the indices that were removed.
/// The construction above yields a full-rank A, so this normally
/// removes nothing; it exists as a build-time guard.
std::vector<long> eliminate_redundant_equalities(EqualitySystem& eq,
                                                 double tol = 1e-9);

/// Rank of A via column-pivoted QR of A'.
long equality_rank(const EqualitySystem& eq, double tol = 1e-9);

/// Assembles the full stacked problem. When `verify_rank` is set and the
/// system is small enough to factor densely, dependent equality rows are
/// detected and dropped.
StackedProblem build_stacked(const SystemConfig& config,
                             const VariableLayout& layout,
                             const Eigen::MatrixXd& observed_queues,
                             const Eigen::MatrixXd& demand,
                             const Eigen::MatrixXd& prev_w,
                             TerminalMode mode, bool verify_rank = true);

/// A point satisfying every equality exactly: weights held at prev_w,
/// inflow split evenly, half of the serviceable inflow forwarded, and
/// loss absorbing the balance. Queues start at the observation and bend
/// gently toward half the per-class capacity share (returning to the
/// observation at tau = H when the terminal is pinned), which keeps the
/// occupancy rows strictly slack for tau >= 1 even when the observation
/// sits on a queue bound. Strictly interior to every non-degenerate
/// inequality row whenever demand > 0 and prev_w lies strictly inside
/// the simplex.
Eigen::VectorXd interior_anchor(const SystemConfig& config,
                                const VariableLayout& layout,
                                const Eigen::MatrixXd& observed_queues,
                                const Eigen::MatrixXd& demand,
                                const Eigen::MatrixXd& prev_w,
                                TerminalMode mode = TerminalMode::kFree);

}  // namespace ocmpc

#endif  // OCMPC_MODEL_HPP_
