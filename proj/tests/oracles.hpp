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

// Test-only oracles, independent of the solver implementation path:
// brute-force vertex enumeration and a from-scratch tableau simplex for
// tiny LPs, central finite differences for derivatives, and random tiny
// instance generators.

#ifndef OCMPC_TESTS_ORACLES_HPP_
#define OCMPC_TESTS_ORACLES_HPP_

#include <Eigen/Dense>
#include <functional>
#include <optional>

#include "ocmpc/model.hpp"
#include "ocmpc/rng.hpp"

namespace ocmpc::testing {

struct LpProblem {
  Eigen::VectorXd c;
  Eigen::MatrixXd A;  // may have zero rows
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
};

LpProblem densify(const StackedProblem& sp);

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  Eigen::VectorXd x;
};

/// Brute force: reduces out the equalities, then enumerates every basis
/// of the inequality system in the null space. Only for genuinely tiny
/// problems (throws when the combination count is unreasonable).
OracleResult vertex_enumeration_lp(const LpProblem& lp);

/// Independent check route: dense tableau simplex (Bland's rule,
/// two-phase). Shares no code with the barrier solver.
OracleResult simplex_lp(const LpProblem& lp);

/// Central finite differences of a scalar function.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h = 1e-6);

/// Central finite difference of a vector function along v.
Eigen::VectorXd fd_directional(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
    const Eigen::VectorXd& x, const Eigen::VectorXd& v, double h = 1e-6);

/// Random small routing instance (valid stacked problem with tags).
struct TinyRouting {
  SystemConfig config;
  StackedProblem sp;
};
TinyRouting random_routing_tiny(RngStream& rng, int P, int M, int W,
                                bool pinned);

/// Random bounded generic LP (box + extra rows, optional equalities)
/// with a strictly feasible interior; no row tags.
StackedProblem random_generic_lp(RngStream& rng);

/// Strictly interior random point of a stacked problem, reached by a
/// damped random walk from a given interior start.
Eigen::VectorXd random_interior_point(const StackedProblem& sp,
                                      const Eigen::VectorXd& start,
                                      RngStream& rng);

}  // namespace ocmpc::testing

#endif  // OCMPC_TESTS_ORACLES_HPP_
