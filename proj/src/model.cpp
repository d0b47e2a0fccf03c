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

#include "ocmpc/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace ocmpc {
namespace {

using Triplet = Eigen::Triplet<double>;

void check_matrix_shape(const Eigen::MatrixXd& m, long rows, long cols,
                        const char* name) {
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionError(std::string(name) + ": expected " +
                         std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
}

void check_observed(const Eigen::MatrixXd& q, const SystemConfig& cfg,
                    const VariableLayout& layout) {
  check_matrix_shape(q, layout.priorities(), layout.modems(),
                     "observed_queues");
  const double slop = 1e-9 * std::max(1.0, cfg.Q_bar);
  if ((q.array() < -slop).any() || (q.array() > cfg.Q_bar + slop).any())
    throw ConfigError("observed_queues must lie in [0, Q_bar]");
}

void check_demand(const Eigen::MatrixXd& demand, const VariableLayout& layout) {
  check_matrix_shape(demand, layout.priorities(), layout.blocks(), "demand");
  if ((demand.array() < 0.0).any())
    throw ConfigError("demand must be non-negative");
}

void check_prev_w(const Eigen::MatrixXd& w, const VariableLayout& layout) {
  check_matrix_shape(w, layout.priorities(), layout.modems(), "prev_w");
  if ((w.array() < -1e-12).any() || (w.array() > 1.0 + 1e-12).any())
    throw ConfigError("prev_w entries must lie in [0, 1]");
}

}  // namespace

VariableLayout build_layout(const SystemConfig& config) {
  config.validate();
  return VariableLayout(config.P, config.M, config.W);
}

Eigen::VectorXd build_cost(const SystemConfig& config,
                           const VariableLayout& layout) {
  if (config.k.size() != layout.priorities())
    throw DimensionError("cost vector k does not match layout priorities");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(layout.size());
  for (int tau = 0; tau <= layout.horizon(); ++tau)
    for (int m = 0; m < layout.modems(); ++m)
      for (int p = 0; p < layout.priorities(); ++p)
        c[layout.index(Var::kLoss, p, m, tau)] = config.k[p];
  return c;
}

EqualitySystem build_equalities(const SystemConfig& config,
                                const VariableLayout& layout,
                                const Eigen::MatrixXd& observed_queues,
                                const Eigen::MatrixXd& demand,
                                TerminalMode mode) {
  check_observed(observed_queues, config, layout);
  check_demand(demand, layout);

  const int P = layout.priorities();
  const int M = layout.modems();
  const int H = layout.horizon();

  EqualitySystem eq;
  std::vector<Triplet> trip;
  long r = 0;

  // (p,m,tau) packet balance: f_in - f_out - dQ - loss = 0.
  for (int tau = 0; tau <= H; ++tau)
    for (int m = 0; m < M; ++m)
      for (int p = 0; p < P; ++p) {
        trip.emplace_back(r, layout.index(Var::kFlowIn, p, m, tau), 1.0);
        trip.emplace_back(r, layout.index(Var::kFlowOut, p, m, tau), -1.0);
        trip.emplace_back(r, layout.index(Var::kQueueDelta, p, m, tau), -1.0);
        trip.emplace_back(r, layout.index(Var::kLoss, p, m, tau), -1.0);
        eq.rows.push_back({EqKind::kBalance, p, m, tau});
        ++r;
      }
  // (m,tau) weight normalization: sum_p w = 1.
  for (int tau = 0; tau <= H; ++tau)
    for (int m = 0; m < M; ++m) {
      for (int p = 0; p < P; ++p)
        trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau), 1.0);
      eq.rows.push_back({EqKind::kWeightSimplex, -1, m, tau});
      ++r;
    }
  // (p,tau) demand matching: sum_m f_in = demand[p,tau].
  for (int tau = 0; tau <= H; ++tau)
    for (int p = 0; p < P; ++p) {
      for (int m = 0; m < M; ++m)
        trip.emplace_back(r, layout.index(Var::kFlowIn, p, m, tau), 1.0);
      eq.rows.push_back({EqKind::kDemandMatch, p, -1, tau});
      ++r;
    }
  // (p,m,tau<H) queue evolution: Q(tau+1) - Q(tau) - dQ(tau) = 0.
  for (int tau = 0; tau < H; ++tau)
    for (int m = 0; m < M; ++m)
      for (int p = 0; p < P; ++p) {
        trip.emplace_back(r, layout.index(Var::kQueue, p, m, tau + 1), 1.0);
        trip.emplace_back(r, layout.index(Var::kQueue, p, m, tau), -1.0);
        trip.emplace_back(r, layout.index(Var::kQueueDelta, p, m, tau), -1.0);
        eq.rows.push_back({EqKind::kQueueChain, p, m, tau});
        ++r;
      }
  // (p,m) initial occupancy pin.
  for (int m = 0; m < M; ++m)
    for (int p = 0; p < P; ++p) {
      trip.emplace_back(r, layout.index(Var::kQueue, p, m, 0), 1.0);
      eq.rows.push_back({EqKind::kQueueInit, p, m, 0});
      ++r;
    }
  // (p,m) terminal pin, batch mode only.
  if (mode == TerminalMode::kPinned)
    for (int m = 0; m < M; ++m)
      for (int p = 0; p < P; ++p) {
        trip.emplace_back(r, layout.index(Var::kQueue, p, m, H), 1.0);
        eq.rows.push_back({EqKind::kQueueTerminal, p, m, H});
        ++r;
      }

  eq.A.resize(r, layout.size());
  eq.A.setFromTriplets(trip.begin(), trip.end());
  eq.b = equality_rhs(eq.rows, config, observed_queues, demand);
  return eq;
}

Eigen::VectorXd equality_rhs(const std::vector<EqRow>& rows,
                             const SystemConfig& config,
                             const Eigen::MatrixXd& observed_queues,
                             const Eigen::MatrixXd& demand) {
  Eigen::VectorXd b(static_cast<long>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    const EqRow& row = rows[i];
    switch (row.kind) {
      case EqKind::kBalance:
      case EqKind::kQueueChain:
        b[i] = 0.0;
        break;
      case EqKind::kWeightSimplex:
        b[i] = 1.0;
        break;
      case EqKind::kDemandMatch:
        b[i] = demand(row.p, row.tau);
        break;
      case EqKind::kQueueInit:
        b[i] = observed_queues(row.p, row.m);
        break;
      case EqKind::kQueueTerminal:
        b[i] = config.Q0;
        break;
    }
  }
  return b;
}

InequalitySystem build_inequalities(const SystemConfig& config,
                                    const VariableLayout& layout,
                                    const Eigen::MatrixXd& prev_w) {
  check_prev_w(prev_w, layout);

  const int P = layout.priorities();
  const int M = layout.modems();
  const int H = layout.horizon();

  InequalitySystem ineq;
  std::vector<Triplet> trip;
  long r = 0;

  auto per_pmt = [&](IneqKind kind, auto&& emit) {
    for (int tau = 0; tau <= H; ++tau)
      for (int m = 0; m < M; ++m)
        for (int p = 0; p < P; ++p) {
          emit(p, m, tau);
          ineq.rows.push_back({kind, p, m, tau});
          ++r;
        }
  };

  per_pmt(IneqKind::kWeightUpper, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau), 1.0);
  });
  per_pmt(IneqKind::kWeightLower, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau), -1.0);
  });
  per_pmt(IneqKind::kRampUpper, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau), 1.0);
    if (tau > 0)
      trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau - 1), -1.0);
  });
  per_pmt(IneqKind::kRampLower, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau), -1.0);
    if (tau > 0)
      trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau - 1), 1.0);
  });
  per_pmt(IneqKind::kServiceCap, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kFlowOut, p, m, tau), 1.0);
    trip.emplace_back(r, layout.index(Var::kWeight, p, m, tau),
                      -1.0 / config.ds);
  });
  for (int tau = 0; tau <= H; ++tau)
    for (int m = 0; m < M; ++m) {
      for (int p = 0; p < P; ++p)
        trip.emplace_back(r, layout.index(Var::kQueue, p, m, tau), 1.0);
      ineq.rows.push_back({IneqKind::kQueueCapacity, -1, m, tau});
      ++r;
    }
  for (int tau = 0; tau <= H; ++tau)
    for (int m = 0; m < M; ++m) {
      for (int p = 0; p < P; ++p)
        trip.emplace_back(r, layout.index(Var::kFlowOut, p, m, tau), 1.0);
      ineq.rows.push_back({IneqKind::kBandwidthCap, -1, m, tau});
      ++r;
    }
  per_pmt(IneqKind::kFlowInLower, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kFlowIn, p, m, tau), -1.0);
  });
  per_pmt(IneqKind::kFlowOutLower, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kFlowOut, p, m, tau), -1.0);
  });
  per_pmt(IneqKind::kLossLower, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kLoss, p, m, tau), -1.0);
  });
  per_pmt(IneqKind::kQueueLower, [&](int p, int m, int tau) {
    trip.emplace_back(r, layout.index(Var::kQueue, p, m, tau), -1.0);
  });

  ineq.C.resize(r, layout.size());
  ineq.C.setFromTriplets(trip.begin(), trip.end());
  ineq.d = inequality_rhs(ineq.rows, config, prev_w);
  return ineq;
}

Eigen::VectorXd inequality_rhs(const std::vector<IneqRow>& rows,
                               const SystemConfig& config,
                               const Eigen::MatrixXd& prev_w) {
  Eigen::VectorXd d(static_cast<long>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    const IneqRow& row = rows[i];
    switch (row.kind) {
      case IneqKind::kWeightUpper:
        d[i] = 1.0;
        break;
      case IneqKind::kRampUpper:
        d[i] = row.tau == 0 ? config.dw_bar + prev_w(row.p, row.m)
                            : config.dw_bar;
        break;
      case IneqKind::kRampLower:
        d[i] = row.tau == 0 ? config.dw_bar - prev_w(row.p, row.m)
                            : config.dw_bar;
        break;
      case IneqKind::kQueueCapacity:
        d[i] = config.Q_bar;
        break;
      case IneqKind::kBandwidthCap:
        d[i] = config.C_bar;
        break;
      default:
        d[i] = 0.0;
        break;
    }
  }
  return d;
}

long equality_rank(const EqualitySystem& eq, double tol) {
  Eigen::MatrixXd At = Eigen::MatrixXd(eq.A).transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
  qr.setThreshold(tol);
  return qr.rank();
}

std::vector<long> eliminate_redundant_equalities(EqualitySystem& eq,
                                                 double tol) {
  const long rows = eq.A.rows();
  if (equality_rank(eq, tol) == rows) return {};

  // Rank defect found: deterministic sweep keeping the lowest-index
  // maximal independent subset (modified Gram-Schmidt over row vectors).
  const long n = eq.A.cols();
  Eigen::MatrixXd dense = Eigen::MatrixXd(eq.A);
  Eigen::MatrixXd basis(rows, n);
  long basis_count = 0;
  std::vector<long> keep, dropped;
  for (long i = 0; i < rows; ++i) {
    Eigen::VectorXd v = dense.row(i);
    const double norm0 = v.norm();
    for (long k = 0; k < basis_count; ++k) v -= basis.row(k).dot(v) * basis.row(k);
    // re-orthogonalize once for numerical safety
    for (long k = 0; k < basis_count; ++k) v -= basis.row(k).dot(v) * basis.row(k);
    if (v.norm() > tol * std::max(1.0, norm0)) {
      basis.row(basis_count++) = v / v.norm();
      keep.push_back(i);
    } else {
      dropped.push_back(i);
    }
  }

  SpMat A_new(static_cast<long>(keep.size()), n);
  std::vector<Triplet> trip;
  std::vector<EqRow> rows_new;
  Eigen::VectorXd b_new(static_cast<long>(keep.size()));
  for (size_t i = 0; i < keep.size(); ++i) {
    for (SpMat::InnerIterator it(eq.A, keep[i]); it; ++it)
      trip.emplace_back(static_cast<long>(i), it.col(), it.value());
    rows_new.push_back(eq.rows[keep[i]]);
    b_new[i] = eq.b[keep[i]];
  }
  A_new.setFromTriplets(trip.begin(), trip.end());
  eq.A.swap(A_new);
  eq.rows = std::move(rows_new);
  eq.b = std::move(b_new);
  return dropped;
}

StackedProblem build_stacked(const SystemConfig& config,
                             const VariableLayout& layout,
                             const Eigen::MatrixXd& observed_queues,
                             const Eigen::MatrixXd& demand,
                             const Eigen::MatrixXd& prev_w, TerminalMode mode,
                             bool verify_rank) {
  StackedProblem sp;
  sp.layout = layout;
  sp.c = build_cost(config, layout);
  EqualitySystem eq =
      build_equalities(config, layout, observed_queues, demand, mode);
  // The dense QR behind the rank guard is cubic; skip it at batch scale
  // where the row structure is already covered by window-scale checks.
  if (verify_rank && eq.A.rows() <= 2000)
    eliminate_redundant_equalities(eq);
  sp.A = std::move(eq.A);
  sp.b = std::move(eq.b);
  sp.eq_rows = std::move(eq.rows);
  InequalitySystem ineq = build_inequalities(config, layout, prev_w);
  sp.C = std::move(ineq.C);
  sp.d = std::move(ineq.d);
  sp.ineq_rows = std::move(ineq.rows);
  return sp;
}

Eigen::VectorXd interior_anchor(const SystemConfig& config,
                                const VariableLayout& layout,
                                const Eigen::MatrixXd& observed_queues,
                                const Eigen::MatrixXd& demand,
                                const Eigen::MatrixXd& prev_w,
                                TerminalMode mode) {
  check_observed(observed_queues, config, layout);
  check_demand(demand, layout);
  check_prev_w(prev_w, layout);

  const int P = layout.priorities();
  const int M = layout.modems();
  const int H = layout.horizon();

  // Queue trajectory shape: 0 at tau = 0 (the pinned observation),
  // ramping toward 1; a tent returning to 0 when the terminal is pinned.
  std::vector<double> shape(H + 1);
  for (int tau = 0; tau <= H; ++tau)
    shape[tau] = mode == TerminalMode::kPinned
                     ? static_cast<double>(std::min(tau, H - tau)) /
                           std::max(1, H / 2 + H % 2)
                     : static_cast<double>(tau) / H;

  // Bend toward half the per-class capacity share. The blend keeps
  // every queue strictly positive and every modem strictly under
  // capacity for any beta in (0, 1]; beta is then shrunk until the
  // queue deltas stay below half the per-step loss, so the balance
  // rows keep strictly positive loss.
  const double q_mid = config.Q_bar / (2.0 * P);
  double beta = 1.0;
  for (int m = 0; m < M; ++m)
    for (int p = 0; p < P; ++p) {
      double min_loss = std::numeric_limits<double>::infinity();
      for (int tau = 0; tau <= H; ++tau) {
        const double f_in = demand(p, tau) / M;
        const double w = prev_w(p, m);
        const double f_out =
            std::max(0.5 * std::min({f_in, w / config.ds, config.C_bar * w}),
                     0.0);
        min_loss = std::min(min_loss, f_in - f_out);
      }
      const double swing = std::abs(q_mid - observed_queues(p, m));
      double max_step = 0.0;
      for (int tau = 0; tau < H; ++tau)
        max_step = std::max(max_step, std::abs(shape[tau + 1] - shape[tau]));
      if (swing * max_step > 0.0)
        beta = std::min(beta, 0.5 * min_loss / (swing * max_step));
    }
  beta = std::max(0.0, std::min(beta, 1.0)) * 0.9;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
  for (int m = 0; m < M; ++m)
    for (int p = 0; p < P; ++p) {
      const double w = prev_w(p, m);
      const double obs = observed_queues(p, m);
      const double drift = beta * (q_mid - obs);
      for (int tau = 0; tau <= H; ++tau) {
        const double f_in = demand(p, tau) / M;
        const double f_out =
            std::max(0.5 * std::min({f_in, w / config.ds, config.C_bar * w}),
                     0.0);
        const double dq =
            tau < H ? drift * (shape[tau + 1] - shape[tau]) : 0.0;
        x[layout.index(Var::kWeight, p, m, tau)] = w;
        x[layout.index(Var::kFlowIn, p, m, tau)] = f_in;
        x[layout.index(Var::kFlowOut, p, m, tau)] = f_out;
        x[layout.index(Var::kQueue, p, m, tau)] = obs + drift * shape[tau];
        x[layout.index(Var::kQueueDelta, p, m, tau)] = dq;
        x[layout.index(Var::kLoss, p, m, tau)] = f_in - f_out - dq;
      }
    }
  return x;
}

}  // namespace ocmpc
