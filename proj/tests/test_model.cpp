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

#include <doctest.h>

#include <Eigen/Dense>
#include <set>

#include "ocmpc/model.hpp"

using namespace ocmpc;

namespace {

SystemConfig reference_config() {
  SystemConfig cfg;
  cfg.M = 16;
  cfg.P = 3;
  cfg.W = 5;
  cfg.T = 100;
  cfg.k = (Eigen::VectorXd(3) << 10, 4, 1).finished();
  cfg.Q_bar = 10.0;
  cfg.Q0 = 0.0;
  cfg.dw_bar = 0.1;
  cfg.ds = 0.5;
  cfg.C_bar = 2.0;
  cfg.eta = 1e4;
  return cfg;
}

SystemConfig tiny_config(int P, int M, int W) {
  SystemConfig cfg;
  cfg.P = P;
  cfg.M = M;
  cfg.W = W;
  cfg.T = W + 1;
  cfg.k = Eigen::VectorXd::LinSpaced(P, P, 1.0);
  cfg.Q_bar = 10.0;
  cfg.Q0 = 0.0;
  cfg.dw_bar = 0.2;
  cfg.ds = 0.5;
  cfg.C_bar = 2.0;
  cfg.eta = 1e4;
  return cfg;
}

}  // namespace

TEST_CASE("layout dimension matches the closed form") {
  CHECK(VariableLayout(3, 16, 5).size() == 1728);  // 6*3*16*6
  CHECK(VariableLayout(1, 1, 1).size() == 12);
}

TEST_CASE("layout index map is a bijection") {
  VariableLayout lay(2, 3, 2);
  std::set<long> seen;
  for (int f = 0; f < kNumVarFamilies; ++f)
    for (int p = 0; p < 2; ++p)
      for (int m = 0; m < 3; ++m)
        for (int tau = 0; tau <= 2; ++tau) {
          const long i = lay.index(static_cast<Var>(f), p, m, tau);
          CHECK(i >= 0);
          CHECK(i < lay.size());
          CHECK(seen.insert(i).second);
          const auto [vf, vp, vm, vt] = lay.inverse(i);
          CHECK(vf == static_cast<Var>(f));
          CHECK(vp == p);
          CHECK(vm == m);
          CHECK(vt == tau);
        }
  CHECK(seen.size() == static_cast<size_t>(lay.size()));
}

TEST_CASE("layout round trip on a specific tuple") {
  VariableLayout lay(3, 4, 3);
  const long i = lay.index(Var::kFlowOut, 1, 2, 1);
  const auto [f, p, m, tau] = lay.inverse(i);
  CHECK(f == Var::kFlowOut);
  CHECK(p == 1);
  CHECK(m == 2);
  CHECK(tau == 1);
}

TEST_CASE("layout rejects out-of-range coordinates") {
  VariableLayout lay(2, 2, 1);
  CHECK_THROWS_AS(lay.index(Var::kQueue, 2, 0, 0), DimensionError);
  CHECK_THROWS_AS(lay.index(Var::kQueue, 0, 0, 2), DimensionError);
  CHECK_THROWS_AS(lay.inverse(lay.size()), DimensionError);
}

TEST_CASE("cost vector carries k_p exactly at loss indices") {
  const SystemConfig cfg = reference_config();
  const VariableLayout lay = build_layout(cfg);
  const Eigen::VectorXd c = build_cost(cfg, lay);
  long nonzero = 0;
  for (long i = 0; i < c.size(); ++i) {
    const auto [f, p, m, tau] = lay.inverse(i);
    if (f == Var::kLoss) {
      CHECK(c[i] == cfg.k[p]);
      ++nonzero;
    } else {
      CHECK(c[i] == 0.0);
    }
  }
  CHECK(nonzero == 3 * 16 * 6);
}

TEST_CASE("single-priority cost vector is the loss indicator") {
  SystemConfig cfg = tiny_config(1, 2, 1);
  cfg.k[0] = 1.0;
  const VariableLayout lay = build_layout(cfg);
  const Eigen::VectorXd c = build_cost(cfg, lay);
  CHECK(c.sum() == 4.0);
  CHECK(c.maxCoeff() == 1.0);
}

TEST_CASE("cost dot product prices one unit of priority-2 loss at k_2") {
  const SystemConfig cfg = reference_config();
  const VariableLayout lay = build_layout(cfg);
  const Eigen::VectorXd c = build_cost(cfg, lay);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(lay.size());
  x[lay.index(Var::kLoss, 1, 7, 3)] = 1.0;  // priority index 1 = second class
  CHECK(c.dot(x) == 4.0);
}

TEST_CASE("equality rhs places demand and zeros where expected") {
  const SystemConfig cfg = tiny_config(1, 1, 1);
  const VariableLayout lay = build_layout(cfg);
  const Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(1, 2, 5.0);
  const Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(1, 1);
  const EqualitySystem eq = build_equalities(cfg, lay, observed, demand,
                                             TerminalMode::kFree);
  for (size_t i = 0; i < eq.rows.size(); ++i) {
    switch (eq.rows[i].kind) {
      case EqKind::kDemandMatch: CHECK(eq.b[i] == 5.0); break;
      case EqKind::kBalance: CHECK(eq.b[i] == 0.0); break;
      case EqKind::kWeightSimplex: CHECK(eq.b[i] == 1.0); break;
      default: break;
    }
  }
}

TEST_CASE("pinned mode adds both occupancy pins") {
  const SystemConfig cfg = tiny_config(2, 2, 2);
  const VariableLayout lay = build_layout(cfg);
  const Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(2, 3, 1.0);
  const Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(2, 2);
  const EqualitySystem free_eq =
      build_equalities(cfg, lay, observed, demand, TerminalMode::kFree);
  const EqualitySystem pin_eq =
      build_equalities(cfg, lay, observed, demand, TerminalMode::kPinned);
  long init = 0, term = 0;
  for (const auto& row : pin_eq.rows) {
    if (row.kind == EqKind::kQueueInit) ++init;
    if (row.kind == EqKind::kQueueTerminal) ++term;
  }
  CHECK(init == 4);
  CHECK(term == 4);
  CHECK(pin_eq.A.rows() == free_eq.A.rows() + 4);
}

TEST_CASE("hand-built feasible point has zero equality residual") {
  const SystemConfig cfg = tiny_config(1, 1, 1);
  const VariableLayout lay = build_layout(cfg);
  const Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(1, 2, 3.0);
  const Eigen::MatrixXd observed = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::MatrixXd prev_w = Eigen::MatrixXd::Ones(1, 1);
  const EqualitySystem eq = build_equalities(cfg, lay, observed, demand,
                                             TerminalMode::kFree);
  // All arrivals routed in and immediately dropped, queues untouched.
  const Eigen::VectorXd x = interior_anchor(cfg, lay, observed, demand, prev_w);
  CHECK((eq.A * x - eq.b).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("first-step ramp rows box the weight around prev_w") {
  const SystemConfig cfg = reference_config();
  const VariableLayout lay = build_layout(cfg);
  const Eigen::MatrixXd prev_w = Eigen::MatrixXd::Constant(3, 16, 0.5);
  const InequalitySystem ineq = build_inequalities(cfg, lay, prev_w);
  for (size_t i = 0; i < ineq.rows.size(); ++i) {
    const IneqRow& row = ineq.rows[i];
    if (row.tau != 0) continue;
    if (row.kind == IneqKind::kRampUpper)
      CHECK(ineq.d[i] == doctest::Approx(0.6));  // w <= prev + dw
    if (row.kind == IneqKind::kRampLower)
      CHECK(ineq.d[i] == doctest::Approx(-0.4));  // -w <= dw - prev
  }
}

TEST_CASE("service rows denormalize weights by the scheduler clock") {
  SystemConfig cfg = tiny_config(2, 1, 1);
  cfg.ds = 0.5;  // full weight allows 2 packets per step
  const VariableLayout lay = build_layout(cfg);
  const InequalitySystem ineq =
      build_inequalities(cfg, lay, Eigen::MatrixXd::Constant(2, 1, 0.5));
  bool found = false;
  for (size_t i = 0; i < ineq.rows.size(); ++i) {
    if (ineq.rows[i].kind != IneqKind::kServiceCap) continue;
    for (SpMat::InnerIterator it(ineq.C, static_cast<long>(i)); it; ++it) {
      const auto [f, p, m, tau] = lay.inverse(it.col());
      if (f == Var::kWeight) {
        CHECK(it.value() == doctest::Approx(-2.0));
        found = true;
      }
    }
  }
  CHECK(found);
}

TEST_CASE("inequality row count matches an independent census") {
  const SystemConfig cfg = reference_config();
  const VariableLayout lay = build_layout(cfg);
  const InequalitySystem ineq =
      build_inequalities(cfg, lay, Eigen::MatrixXd::Constant(3, 16, 1.0 / 3));

  // Independent enumeration: walk the constraint statement kind by kind.
  long census = 0;
  for (int tau = 0; tau <= cfg.W; ++tau)
    for (int m = 0; m < cfg.M; ++m) {
      for (int p = 0; p < cfg.P; ++p) {
        census += 2;  // weight box
        census += 2;  // ramp, both signs
        census += 1;  // service cap
        census += 4;  // non-negativity of f_in, f_out, loss, Q
      }
      census += 2;  // queue capacity and bandwidth
    }
  CHECK(ineq.C.rows() == census);
  CHECK(census == (9 * cfg.P * cfg.M + 2 * cfg.M) * (cfg.W + 1));
}

TEST_CASE("structure is round-invariant, only rhs varies") {
  const SystemConfig cfg = tiny_config(2, 3, 2);
  const VariableLayout lay = build_layout(cfg);
  const Eigen::MatrixXd demand1 = Eigen::MatrixXd::Constant(2, 3, 1.0);
  const Eigen::MatrixXd demand2 = Eigen::MatrixXd::Constant(2, 3, 7.0);
  const Eigen::MatrixXd obs1 = Eigen::MatrixXd::Zero(2, 3);
  const Eigen::MatrixXd obs2 = Eigen::MatrixXd::Constant(2, 3, 2.0);
  const Eigen::MatrixXd w1 = Eigen::MatrixXd::Constant(2, 3, 0.5);
  const Eigen::MatrixXd w2 =
      (Eigen::MatrixXd(2, 3) << 0.2, 0.3, 0.4, 0.8, 0.7, 0.6).finished();

  const EqualitySystem eqa =
      build_equalities(cfg, lay, obs1, demand1, TerminalMode::kFree);
  const EqualitySystem eqb =
      build_equalities(cfg, lay, obs2, demand2, TerminalMode::kFree);
  CHECK(Eigen::MatrixXd(eqa.A) == Eigen::MatrixXd(eqb.A));
  CHECK(eqa.b != eqb.b);

  const InequalitySystem ia = build_inequalities(cfg, lay, w1);
  const InequalitySystem ib = build_inequalities(cfg, lay, w2);
  CHECK(Eigen::MatrixXd(ia.C) == Eigen::MatrixXd(ib.C));
  for (size_t i = 0; i < ia.rows.size(); ++i) {
    const bool ramp0 = (ia.rows[i].kind == IneqKind::kRampUpper ||
                        ia.rows[i].kind == IneqKind::kRampLower) &&
                       ia.rows[i].tau == 0;
    if (!ramp0) CHECK(ia.d[i] == ib.d[i]);
  }

  // rhs recomputation reproduces the built vectors bit for bit
  CHECK(equality_rhs(eqb.rows, cfg, obs2, demand2) == eqb.b);
  CHECK(inequality_rhs(ib.rows, cfg, w2) == ib.d);
}

TEST_CASE("equality system has full row rank on the reference config") {
  const SystemConfig cfg = reference_config();
  const VariableLayout lay = build_layout(cfg);
  EqualitySystem eq = build_equalities(
      cfg, lay, Eigen::MatrixXd::Zero(3, 16),
      Eigen::MatrixXd::Constant(3, 6, 2.0), TerminalMode::kFree);
  CHECK(equality_rank(eq) == eq.A.rows());
  CHECK(eliminate_redundant_equalities(eq).empty());
}

TEST_CASE("pinned tiny system also has full row rank") {
  const SystemConfig cfg = tiny_config(2, 2, 3);
  const VariableLayout lay = build_layout(cfg);
  EqualitySystem eq = build_equalities(
      cfg, lay, Eigen::MatrixXd::Zero(2, 2),
      Eigen::MatrixXd::Constant(2, 4, 1.5), TerminalMode::kPinned);
  CHECK(equality_rank(eq) == eq.A.rows());
}

TEST_CASE("redundant row elimination keeps the lowest index") {
  // Duplicate a row by hand and check the copy is the one dropped.
  const SystemConfig cfg = tiny_config(1, 1, 1);
  const VariableLayout lay = build_layout(cfg);
  EqualitySystem eq = build_equalities(
      cfg, lay, Eigen::MatrixXd::Zero(1, 1),
      Eigen::MatrixXd::Constant(1, 2, 1.0), TerminalMode::kFree);
  const long rows = eq.A.rows();
  SpMat A2(rows + 1, eq.A.cols());
  std::vector<Eigen::Triplet<double>> trip;
  for (long r = 0; r < rows; ++r)
    for (SpMat::InnerIterator it(eq.A, r); it; ++it)
      trip.emplace_back(r, it.col(), it.value());
  for (SpMat::InnerIterator it(eq.A, 2); it; ++it)
    trip.emplace_back(rows, it.col(), it.value());
  A2.setFromTriplets(trip.begin(), trip.end());
  eq.A.swap(A2);
  eq.rows.push_back(eq.rows[2]);
  Eigen::VectorXd b2(rows + 1);
  b2.head(rows) = eq.b;
  b2[rows] = eq.b[2];
  eq.b = b2;

  const auto dropped = eliminate_redundant_equalities(eq);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0] == rows);  // the appended duplicate, not the original
  CHECK(eq.A.rows() == rows);
}

TEST_CASE("builders reject dimension mismatches") {
  const SystemConfig cfg = tiny_config(2, 2, 1);
  const VariableLayout lay = build_layout(cfg);
  const Eigen::MatrixXd demand_bad = Eigen::MatrixXd::Constant(2, 5, 1.0);
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(
      build_equalities(cfg, lay, obs, demand_bad, TerminalMode::kFree),
      DimensionError);
  CHECK_THROWS_AS(
      build_equalities(cfg, lay, Eigen::MatrixXd::Zero(3, 2),
                       Eigen::MatrixXd::Constant(2, 2, 1.0),
                       TerminalMode::kFree),
      DimensionError);
  CHECK_THROWS_AS(build_inequalities(cfg, lay, Eigen::MatrixXd::Zero(1, 2)),
                  DimensionError);
  CHECK_THROWS_AS(
      build_equalities(cfg, lay, Eigen::MatrixXd::Constant(2, 2, 99.0),
                       Eigen::MatrixXd::Constant(2, 2, 1.0),
                       TerminalMode::kFree),
      ConfigError);  // queues beyond capacity
}

TEST_CASE("config invariants are enforced") {
  SystemConfig cfg = reference_config();
  cfg.T = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = reference_config();
  cfg.k[1] = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = reference_config();
  cfg.dw_bar = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = reference_config();
  cfg.Q0 = 11.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
