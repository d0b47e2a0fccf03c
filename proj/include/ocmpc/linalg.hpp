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

#ifndef OCMPC_LINALG_HPP_
#define OCMPC_LINALG_HPP_

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <vector>

#include "ocmpc/errors.hpp"
#include "ocmpc/model.hpp"

namespace ocmpc {

/// Pivoted LDL' factorization of a symmetric (possibly indefinite)
/// matrix, Bunch-Kaufman partial pivoting with 1x1 and 2x2 blocks.
/// Pivot selection takes the largest-magnitude candidate and the lowest
/// index on ties, so factorizations are bit-reproducible.
class SymmetricIndefiniteFactor {
 public:
  /// Factors K in place. Throws SingularSystemError on breakdown.
  explicit SymmetricIndefiniteFactor(const Eigen::MatrixXd& K);

  /// Single triangular solve pass (no refinement).
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// |smallest block pivot| / |largest block pivot|.
  double condition_indicator() const { return condition_; }

 private:
  Eigen::MatrixXd lf_;     // L below the diagonal, D blocks on it
  std::vector<int> ipiv_;  // LAPACK-style pivot record
  double condition_ = 0.0;
};

/// Solves K x = rhs for symmetric indefinite K with iterative
/// refinement; the result satisfies ||K x - rhs|| <= 1e-10 ||rhs||
/// unless K is numerically singular, in which case it throws.
Eigen::VectorXd dense_symmetric_solve(const Eigen::MatrixXd& K,
                                      const Eigen::VectorXd& rhs);

/// Factor/solve driver for the saddle system
///
///   [ H   A' ] [dx ]   [r1]      H = C' diag(weights) C
///   [ A   0  ] [dnu] = [r2]
///
/// The sparsity pattern is fixed at construction; factorize() refreshes
/// values for new barrier weights (one count per call, which is how the
/// per-round factorization budget is audited). Solves apply iterative
/// refinement to a 1e-10 relative residual.
class KktSolver {
 public:
  KktSolver(const SpMat& A, const SpMat& C);

  /// weights: one non-negative entry per C row (0 = row excluded).
  void factorize(const Eigen::VectorXd& weights);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  long dimension() const { return dim_; }
  long factorizations() const { return n_fact_; }

 private:
  void assemble(const Eigen::VectorXd& weights);

  SpMat A_, C_;  // row-major views of the problem blocks
  long n_ = 0, mA_ = 0, dim_ = 0;
  Eigen::SparseMatrix<double> K_;  // column-major for the LU
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool analyzed_ = false;
  bool factored_ = false;
  long n_fact_ = 0;
};

}  // namespace ocmpc

#endif  // OCMPC_LINALG_HPP_
