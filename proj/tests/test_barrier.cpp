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

#include "ocmpc/barrier.hpp"
#include "oracles.hpp"

using namespace ocmpc;
using namespace ocmpc::testing;

namespace {

// Single scalar variable with x <= 1 and zero cost.
StackedProblem scalar_box() {
  StackedProblem sp;
  sp.layout = VariableLayout(1, 1, 1);
  sp.c = Eigen::VectorXd::Zero(1);
  sp.A.resize(0, 1);
  sp.b.resize(0);
  sp.C.resize(1, 1);
  sp.C.insert(0, 0) = 1.0;
  sp.C.makeCompressed();
  sp.d = Eigen::VectorXd::Ones(1);
  return sp;
}

// Two variables on the simplex with box bounds: one equality
// x1 + x2 = 1, inequalities 0 <= xi <= 1, cost (1, 0).
StackedProblem two_variable_simplex() {
  StackedProblem sp;
  sp.layout = VariableLayout(1, 1, 1);
  sp.c = (Eigen::VectorXd(2) << 1, 0).finished();
  sp.A.resize(1, 2);
  sp.A.insert(0, 0) = 1.0;
  sp.A.insert(0, 1) = 1.0;
  sp.A.makeCompressed();
  sp.b = Eigen::VectorXd::Ones(1);
  sp.C.resize(4, 2);
  sp.C.insert(0, 0) = 1.0;
  sp.C.insert(1, 1) = 1.0;
  sp.C.insert(2, 0) = -1.0;
  sp.C.insert(3, 1) = -1.0;
  sp.C.makeCompressed();
  sp.d = (Eigen::VectorXd(4) << 1, 1, 0, 0).finished();
  return sp;
}

TinyRouting small_routing(RngStream& rng) {
  return random_routing_tiny(rng, 2, 2, 2, false);
}

}  // namespace

TEST_CASE("barrier derivatives of a single box constraint at zero") {
  const StackedProblem sp = scalar_box();
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const BarrierEval eval = barrier_eval(x, sp, 1.0, /*with_hessian=*/true);
  CHECK(eval.value == doctest::Approx(0.0));     // -log(1)
  CHECK(eval.gradient[0] == doctest::Approx(1.0));
  CHECK(eval.hessian(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("barrier_eval names the violated row") {
  const StackedProblem sp = scalar_box();
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
  try {
    barrier_eval(x, sp, 1.0);
    FAIL("expected NotInteriorError");
  } catch (const NotInteriorError& e) {
    CHECK(e.row == 0);
    CHECK(e.slack <= 0.0);
  }
}

TEST_CASE("gradient matches central finite differences on routing problems") {
  RngStream rng(31, 0);
  const TinyRouting tiny = small_routing(rng);
  const StackedProblem& sp = tiny.sp;
  const Eigen::VectorXd x0 = phase_one(sp, sp.b);
  const double eta = 7.0;
  auto value = [&](const Eigen::VectorXd& x) {
    return barrier_eval(x, sp, eta).value;
  };
  for (int pt = 0; pt < 20; ++pt) {
    const Eigen::VectorXd x = random_interior_point(sp, x0, rng);
    const BarrierEval eval = barrier_eval(x, sp, eta);
    const Eigen::VectorXd fd = fd_gradient(value, x);
    CHECK((eval.gradient - fd).norm() <=
          1e-5 * std::max(1.0, eval.gradient.norm()));
  }
}

TEST_CASE("hessian-vector products match differentiated gradients") {
  RngStream rng(37, 0);
  const TinyRouting tiny = small_routing(rng);
  const StackedProblem& sp = tiny.sp;
  const Eigen::VectorXd x0 = phase_one(sp, sp.b);
  auto grad = [&](const Eigen::VectorXd& x) {
    return barrier_eval(x, sp, 3.0).gradient;
  };
  for (int pt = 0; pt < 10; ++pt) {
    const Eigen::VectorXd x = random_interior_point(sp, x0, rng);
    Eigen::VectorXd v(x.size());
    for (long i = 0; i < v.size(); ++i) v[i] = rng.normal();
    v.normalize();
    const Eigen::VectorXd hv = barrier_hessian_product(x, sp, v);
    const Eigen::VectorXd fd = fd_directional(grad, x, v, 1e-6);
    CHECK((hv - fd).norm() <= 1e-5 * std::max(1.0, hv.norm()));
  }
}

TEST_CASE("dense hessian is symmetric positive semidefinite") {
  RngStream rng(41, 0);
  const TinyRouting tiny = random_routing_tiny(rng, 2, 1, 1, false);
  const StackedProblem& sp = tiny.sp;
  const Eigen::VectorXd x = phase_one(sp, sp.b);
  const BarrierEval eval = barrier_eval(x, sp, 2.0, /*with_hessian=*/true);
  CHECK((eval.hessian - eval.hessian.transpose()).norm() < 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(eval.hessian);
  CHECK(es.eigenvalues().minCoeff() > -1e-8);
}

TEST_CASE("newton step on the hand-solved two-variable system") {
  const StackedProblem sp = two_variable_simplex();
  BarrierProblem problem(sp, 1.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.5);
  const StepResult step = newton_kkt_step(x, problem, sp.b);
  // By hand: H = diag(8, 8), KKT solution u = (1/16, -1/16), w = 0.5,
  // full step accepted (boundary is 8 step lengths away).
  CHECK(step.alpha == doctest::Approx(1.0));
  CHECK(step.x_next[0] == doctest::Approx(0.5 - 1.0 / 16).epsilon(1e-10));
  CHECK(step.x_next[1] == doctest::Approx(0.5 + 1.0 / 16).epsilon(1e-10));
  CHECK(step.dual[0] == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(step.primal_residual == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("newton step vanishes at the centering optimum") {
  const StackedProblem sp = two_variable_simplex();
  BarrierProblem problem(sp, 1.0);
  const CenteringResult center =
      solve_centering(problem, Eigen::VectorXd::Constant(2, 0.5), sp.b, 1e-12);
  const StepResult step = newton_kkt_step(center.x, problem, sp.b);
  CHECK((step.x_next - center.x).norm() < 1e-9);
  CHECK(step.newton_decrement < 1e-9);
}

TEST_CASE("iterated newton steps reach the infeasible-start fixed point") {
  RngStream rng(53, 0);
  const TinyRouting tiny = small_routing(rng);
  const StackedProblem& sp = tiny.sp;
  BarrierProblem problem(sp, 50.0);
  // random strictly interior start, off the equality manifold
  Eigen::VectorXd x = random_interior_point(sp, phase_one(sp, sp.b), rng);
  x += 0.01 * Eigen::VectorXd::Random(x.size());
  if (problem.min_slack(x) <= 0.0) x = phase_one(sp, sp.b);

  double residual = 1.0;
  int iterations = 0;
  for (; iterations < 50; ++iterations) {
    const StepResult step = newton_kkt_step(x, problem, sp.b);
    x = step.x_next;
    residual = step.residual_scaled;
    if (residual < 1e-8) break;
  }
  CHECK(residual < 1e-8);
  CHECK(iterations < 50);

  const CenteringResult center = solve_centering(problem, phase_one(sp, sp.b),
                                                 sp.b, 1e-10);
  CHECK((x - center.x).norm() <= 1e-6 * (1.0 + center.x.norm()));
}

TEST_CASE("centering returns immediately from an optimal start") {
  const StackedProblem sp = two_variable_simplex();
  BarrierProblem problem(sp, 1.0);
  const CenteringResult first =
      solve_centering(problem, Eigen::VectorXd::Constant(2, 0.5), sp.b, 1e-10);
  const CenteringResult again = solve_centering(problem, first.x, sp.b, 1e-8);
  CHECK(again.iterations == 1);
  CHECK((again.x - first.x).norm() == 0.0);
}

TEST_CASE("centering optimum beats random feasible points") {
  RngStream rng(61, 0);
  const StackedProblem sp = two_variable_simplex();
  BarrierProblem problem(sp, 30.0);
  const CenteringResult center =
      solve_centering(problem, Eigen::VectorXd::Constant(2, 0.5), sp.b, 1e-10);
  const double val = problem.value(center.x);
  for (int i = 0; i < 1000; ++i) {
    const double t = 1e-6 + (1.0 - 2e-6) * rng.uniform01();
    const Eigen::VectorXd y = (Eigen::VectorXd(2) << t, 1.0 - t).finished();
    CHECK(problem.value(y) >= val - 1e-9);
  }
}

TEST_CASE("path solver matches vertex enumeration on a toy routing LP") {
  RngStream rng(71, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const TinyRouting tiny = random_routing_tiny(rng, 1, 1, 1, false);
    const PathResult path =
        solve_to_optimality(tiny.sp, tiny.sp.b, 20.0, 10.0, 1e-8);
    const OracleResult oracle = vertex_enumeration_lp(densify(tiny.sp));
    REQUIRE(oracle.feasible);
    CHECK(std::abs(path.objective - oracle.objective) <=
          1e-6 * std::max(1.0, std::abs(oracle.objective)));
    CHECK(path.gap_bound <= 1e-8 * (1.0 + std::abs(path.objective)));
  }
}

TEST_CASE("path objective is monotone non-increasing across stages") {
  RngStream rng(83, 0);
  const TinyRouting tiny = small_routing(rng);
  const StackedProblem& sp = tiny.sp;
  BarrierProblem problem(sp, 10.0);
  Eigen::VectorXd x = phase_one(sp, sp.b);
  double prev = std::numeric_limits<double>::infinity();
  double eta = 10.0;
  for (int stage = 0; stage < 6; ++stage) {
    problem.set_eta(eta);
    const CenteringResult center = solve_centering(problem, x, sp.b, 1e-8);
    x = center.x;
    const double objective = sp.c.dot(x);
    CHECK(objective <= prev + 1e-7 * (1.0 + std::abs(prev)));
    prev = objective;
    eta *= 20.0;
  }
}

TEST_CASE("phase one accepts the anchored routing start") {
  RngStream rng(91, 0);
  const TinyRouting tiny = small_routing(rng);
  const Eigen::VectorXd x0 = phase_one(tiny.sp, tiny.sp.b);
  BarrierProblem problem(tiny.sp, 1.0);
  CHECK(problem.min_slack(x0) > 0.0);
  CHECK((tiny.sp.A * x0 - tiny.sp.b).norm() <=
        1e-8 * std::max(1.0, tiny.sp.b.norm()));
  CHECK_NOTHROW(problem.value(x0));  // accepted by the barrier
}

TEST_CASE("phase one without tags goes through the auxiliary solve") {
  RngStream rng(97, 0);
  for (int trial = 0; trial < 8; ++trial) {
    const StackedProblem sp = random_generic_lp(rng);
    const Eigen::VectorXd x0 = phase_one(sp, sp.b, 1e-3);
    CHECK((sp.d - sp.C * x0).minCoeff() > 0.0);
    if (sp.A.rows() > 0)
      CHECK((sp.A * x0 - sp.b).norm() <= 1e-8 * std::max(1.0, sp.b.norm()));
  }
}

TEST_CASE("phase one certifies an infeasible inequality system") {
  // x <= -1 and x >= 0 cannot both hold.
  StackedProblem sp;
  sp.layout = VariableLayout(1, 1, 1);
  sp.c = Eigen::VectorXd::Ones(1);
  sp.A.resize(0, 1);
  sp.b.resize(0);
  sp.C.resize(2, 1);
  sp.C.insert(0, 0) = 1.0;
  sp.C.insert(1, 0) = -1.0;
  sp.C.makeCompressed();
  sp.d = (Eigen::VectorXd(2) << -1, 0).finished();
  try {
    phase_one(sp, sp.b);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.max_min_slack <= 0.0);
  }
}

TEST_CASE("overfull queues are certified infeasible at construction") {
  RngStream rng(103, 0);
  SystemConfig cfg;
  cfg.P = 2;
  cfg.M = 1;
  cfg.W = 1;
  cfg.T = 2;
  cfg.k = (Eigen::VectorXd(2) << 2, 1).finished();
  cfg.Q_bar = 1.0;
  const VariableLayout lay = build_layout(cfg);
  // Each entry is within [0, Q_bar] but the modem total exceeds Q_bar.
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Constant(2, 1, 0.9);
  const Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(2, 2, 1.0);
  const Eigen::MatrixXd prev_w = Eigen::MatrixXd::Constant(2, 1, 0.5);
  const StackedProblem sp =
      build_stacked(cfg, lay, obs, demand, prev_w, TerminalMode::kFree);
  CHECK_THROWS_AS(BarrierProblem(sp, 1.0), InfeasibleError);
}

TEST_CASE("presolve drops pinned-empty queue rows and keeps the rest") {
  RngStream rng(107, 0);
  SystemConfig cfg;
  cfg.P = 2;
  cfg.M = 2;
  cfg.W = 2;
  cfg.T = 3;
  cfg.k = (Eigen::VectorXd(2) << 4, 1).finished();
  const VariableLayout lay = build_layout(cfg);
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Zero(2, 2);  // empty queues
  const Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(2, 3, 1.5);
  const Eigen::MatrixXd prev_w = Eigen::MatrixXd::Constant(2, 2, 0.5);
  const StackedProblem sp =
      build_stacked(cfg, lay, obs, demand, prev_w, TerminalMode::kFree);
  BarrierProblem problem(sp, 1.0);
  long dropped = 0;
  for (size_t i = 0; i < sp.ineq_rows.size(); ++i) {
    if (problem.kept()[i]) continue;
    ++dropped;
    CHECK(sp.ineq_rows[i].kind == IneqKind::kQueueLower);
    CHECK(sp.ineq_rows[i].tau == 0);
  }
  CHECK(dropped == 4);  // one per (p, m)
}

TEST_CASE("catalog and algebraic presolve agree on tagged problems") {
  RngStream rng(109, 0);
  for (int trial = 0; trial < 6; ++trial) {
    const int P = 1 + (trial % 2);
    const TinyRouting tiny = random_routing_tiny(rng, P, 1 + (trial % 3), 1,
                                                 trial % 2 == 1);
    BarrierProblem tagged(tiny.sp, 1.0);
    StackedProblem untagged = tiny.sp;
    untagged.eq_rows.clear();
    untagged.ineq_rows.clear();
    BarrierProblem algebraic(untagged, 1.0);
    REQUIRE(tagged.kept().size() == algebraic.kept().size());
    for (size_t i = 0; i < tagged.kept().size(); ++i)
      CHECK(tagged.kept()[i] == algebraic.kept()[i]);
  }
}

TEST_CASE("single-priority problems stay solvable through the presolve") {
  RngStream rng(113, 0);
  // With P = 1 the simplex equality forces w = 1, so w <= 1 is an
  // implicit equality; the barrier must still center and optimize.
  const TinyRouting tiny = random_routing_tiny(rng, 1, 2, 1, false);
  const PathResult path = solve_to_optimality(tiny.sp, tiny.sp.b);
  const OracleResult oracle = simplex_lp(densify(tiny.sp));
  REQUIRE(oracle.feasible);
  CHECK(std::abs(path.objective - oracle.objective) <=
        1e-6 * std::max(1.0, std::abs(oracle.objective)));
}

TEST_CASE("dense and sparse kernels produce the same newton step") {
  RngStream rng(127, 0);
  const TinyRouting tiny = small_routing(rng);
  const StackedProblem& sp = tiny.sp;
  BarrierProblem sparse(sp, 5.0, KktKernel::kSparse);
  BarrierProblem dense(sp, 5.0, KktKernel::kDense);
  const Eigen::VectorXd x = phase_one(sp, sp.b);
  const StepResult a = newton_kkt_step(x, sparse, sp.b);
  const StepResult b = newton_kkt_step(x, dense, sp.b);
  CHECK((a.x_next - b.x_next).norm() <= 1e-8 * (1.0 + a.x_next.norm()));
  CHECK((a.dual - b.dual).norm() <= 1e-6 * (1.0 + a.dual.norm()));
}

TEST_CASE("interior preservation across arbitrary step sequences") {
  RngStream rng(131, 0);
  const TinyRouting tiny = small_routing(rng);
  BarrierProblem problem(tiny.sp, 1e4);
  Eigen::VectorXd x = phase_one(tiny.sp, tiny.sp.b);
  for (int i = 0; i < 30; ++i) {
    const StepResult step = newton_kkt_step(x, problem, tiny.sp.b);
    CHECK(step.min_slack > 0.0);
    x = step.x_next;
  }
}

TEST_CASE("duality gap bound is honored at termination") {
  RngStream rng(137, 0);
  const TinyRouting tiny = random_routing_tiny(rng, 2, 1, 1, false);
  const double tol = 1e-7;
  const PathResult path = solve_to_optimality(tiny.sp, tiny.sp.b, 20, 10, tol);
  CHECK(path.gap_bound <= tol * (1.0 + std::abs(path.objective)));
  // the gap bound certifies proximity to the true optimum, up to the
  // centering tolerance and the oracle's own accuracy
  const OracleResult oracle = simplex_lp(densify(tiny.sp));
  const double slack = path.gap_bound + 1e-7 * (1.0 + std::abs(path.objective));
  CHECK(path.objective <= oracle.objective + slack);
  CHECK(path.objective >= oracle.objective - slack);
}
