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

#include "ocmpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ocmpc {

namespace {
// Bunch-Kaufman pivot balance constant, (1 + sqrt(17)) / 8.
constexpr double kAlpha = 0.6403882032022076;
}  // namespace

SymmetricIndefiniteFactor::SymmetricIndefiniteFactor(const Eigen::MatrixXd& K) {
  const long n = K.rows();
  if (n != K.cols()) throw DimensionError("matrix must be square");
  const double sym_err = (K - K.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if (sym_err > 1e-10 * scale)
    throw DimensionError("matrix is not symmetric");

  lf_ = K;
  ipiv_.assign(n, 0);
  Eigen::MatrixXd& a = lf_;

  double min_piv = std::numeric_limits<double>::infinity();
  double max_piv = 0.0;
  const double breakdown = n * std::numeric_limits<double>::epsilon() * scale;

  long k = 0;
  while (k < n) {
    int kstep = 1;
    const double absakk = std::abs(a(k, k));

    // Largest off-diagonal magnitude in column k (lowest index wins ties).
    long imax = k;
    double colmax = 0.0;
    for (long i = k + 1; i < n; ++i) {
      const double v = std::abs(a(i, k));
      if (v > colmax) {
        colmax = v;
        imax = i;
      }
    }

    if (std::max(absakk, colmax) <= breakdown)
      throw SingularSystemError("symmetric factorization breakdown", n - k,
                                max_piv > 0.0 ? breakdown / max_piv : 0.0);

    long kp = k;
    if (absakk >= kAlpha * colmax) {
      kp = k;  // 1x1 pivot at k
    } else {
      // Largest magnitude in row/column imax of the trailing block.
      double rowmax = 0.0;
      for (long j = k; j < imax; ++j) rowmax = std::max(rowmax, std::abs(a(imax, j)));
      for (long i = imax + 1; i < n; ++i) rowmax = std::max(rowmax, std::abs(a(i, imax)));
      if (absakk * rowmax >= kAlpha * colmax * colmax) {
        kp = k;  // 1x1 pivot at k after all
      } else if (std::abs(a(imax, imax)) >= kAlpha * rowmax) {
        kp = imax;  // 1x1 pivot at imax
      } else {
        kp = imax;  // 2x2 pivot on (k, imax)
        kstep = 2;
      }
    }

    const long kk = k + kstep - 1;
    if (kp != kk) {
      // Symmetric interchange of rows/columns kk and kp (lower triangle).
      for (long i = kp + 1; i < n; ++i) std::swap(a(i, kk), a(i, kp));
      for (long j = kk + 1; j < kp; ++j) std::swap(a(j, kk), a(kp, j));
      std::swap(a(kk, kk), a(kp, kp));
      if (kstep == 2) std::swap(a(k + 1, k), a(kp, k));
    }

    if (kstep == 1) {
      const double d = a(k, k);
      if (std::abs(d) <= breakdown)
        throw SingularSystemError("zero 1x1 pivot", n - k,
                                  max_piv > 0.0 ? std::abs(d) / max_piv : 0.0);
      min_piv = std::min(min_piv, std::abs(d));
      max_piv = std::max(max_piv, std::abs(d));
      const double dinv = 1.0 / d;
      for (long j = k + 1; j < n; ++j) {
        const double wj = a(j, k) * dinv;
        if (wj != 0.0)
          for (long i = j; i < n; ++i) a(i, j) -= a(i, k) * wj;
      }
      for (long i = k + 1; i < n; ++i) a(i, k) *= dinv;
      ipiv_[k] = static_cast<int>(kp);
    } else {
      const double d21 = a(k + 1, k);
      const double piv_mag = std::sqrt(std::abs(
          a(k, k) * a(k + 1, k + 1) - d21 * d21));
      min_piv = std::min(min_piv, std::max(piv_mag, std::abs(d21)));
      max_piv = std::max(max_piv, std::max(piv_mag, std::abs(d21)));
      if (k < n - 2) {
        const double d11 = a(k + 1, k + 1) / d21;
        const double d22 = a(k, k) / d21;
        const double t = 1.0 / (d11 * d22 - 1.0);
        const double d21inv = t / d21;
        for (long j = k + 2; j < n; ++j) {
          const double wk = d21inv * (d11 * a(j, k) - a(j, k + 1));
          const double wkp1 = d21inv * (d22 * a(j, k + 1) - a(j, k));
          for (long i = j; i < n; ++i)
            a(i, j) -= a(i, k) * wk + a(i, k + 1) * wkp1;
          a(j, k) = wk;
          a(j, k + 1) = wkp1;
        }
      }
      ipiv_[k] = -static_cast<int>(kp) - 1;
      ipiv_[k + 1] = ipiv_[k];
    }
    k += kstep;
  }
  condition_ = max_piv > 0.0 ? min_piv / max_piv : 0.0;
}

Eigen::VectorXd SymmetricIndefiniteFactor::solve(
    const Eigen::VectorXd& rhs) const {
  const long n = lf_.rows();
  if (rhs.size() != n) throw DimensionError("rhs size mismatch");
  Eigen::VectorXd b = rhs;
  const Eigen::MatrixXd& a = lf_;

  // Forward pass: P' then inv(L) then inv(D), block by block.
  long k = 0;
  while (k < n) {
    if (ipiv_[k] >= 0) {
      const long kp = ipiv_[k];
      if (kp != k) std::swap(b[k], b[kp]);
      for (long i = k + 1; i < n; ++i) b[i] -= a(i, k) * b[k];
      b[k] /= a(k, k);
      ++k;
    } else {
      const long kp = -ipiv_[k] - 1;
      if (kp != k + 1) std::swap(b[k + 1], b[kp]);
      for (long i = k + 2; i < n; ++i)
        b[i] -= a(i, k) * b[k] + a(i, k + 1) * b[k + 1];
      const double akm1k = a(k + 1, k);
      const double akm1 = a(k, k) / akm1k;
      const double ak = a(k + 1, k + 1) / akm1k;
      const double denom = akm1 * ak - 1.0;
      const double bkm1 = b[k] / akm1k;
      const double bk = b[k + 1] / akm1k;
      b[k] = (ak * bkm1 - bk) / denom;
      b[k + 1] = (akm1 * bk - bkm1) / denom;
      k += 2;
    }
  }

  // Backward pass: inv(L') then P, entering each block at its last row.
  k = n - 1;
  while (k >= 0) {
    if (ipiv_[k] >= 0) {
      double acc = 0.0;
      for (long i = k + 1; i < n; ++i) acc += a(i, k) * b[i];
      b[k] -= acc;
      const long kp = ipiv_[k];
      if (kp != k) std::swap(b[k], b[kp]);
      --k;
    } else {
      double acc0 = 0.0, acc1 = 0.0;
      for (long i = k + 1; i < n; ++i) {
        acc0 += a(i, k - 1) * b[i];
        acc1 += a(i, k) * b[i];
      }
      b[k - 1] -= acc0;
      b[k] -= acc1;
      const long kp = -ipiv_[k] - 1;
      if (kp != k) std::swap(b[k], b[kp]);
      k -= 2;
    }
  }
  return b;
}

Eigen::VectorXd dense_symmetric_solve(const Eigen::MatrixXd& K,
                                      const Eigen::VectorXd& rhs) {
  SymmetricIndefiniteFactor factor(K);
  Eigen::VectorXd x = factor.solve(rhs);
  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  for (int pass = 0; pass < 3; ++pass) {
    const Eigen::VectorXd r = rhs - K * x;
    if (r.norm() <= 1e-10 * rhs_norm) return x;
    x += factor.solve(r);
  }
  const double rel = (rhs - K * x).norm() / rhs_norm;
  if (rel > 1e-10)
    throw SingularSystemError(
        "iterative refinement stalled, matrix near-singular", 0,
        factor.condition_indicator());
  return x;
}

KktSolver::KktSolver(const SpMat& A, const SpMat& C) : A_(A), C_(C) {
  if (A.cols() != C.cols())
    throw DimensionError("A and C must share the variable dimension");
  n_ = A.cols();
  mA_ = A.rows();
  dim_ = n_ + mA_;
}

void KktSolver::assemble(const Eigen::VectorXd& weights) {
  if (weights.size() != C_.rows())
    throw DimensionError("one weight per inequality row required");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(C_.nonZeros()) * 4 + A_.nonZeros() * 2);
  // H = C' diag(w) C, expanded row by row. Zero weights still contribute
  // explicit zeros so the pattern is identical across factorizations.
  for (long r = 0; r < C_.rows(); ++r) {
    const double w = weights[r];
    for (SpMat::InnerIterator it1(C_, r); it1; ++it1)
      for (SpMat::InnerIterator it2(C_, r); it2; ++it2)
        trip.emplace_back(it1.col(), it2.col(), w * it1.value() * it2.value());
  }
  for (long r = 0; r < A_.rows(); ++r)
    for (SpMat::InnerIterator it(A_, r); it; ++it) {
      trip.emplace_back(n_ + r, it.col(), it.value());
      trip.emplace_back(it.col(), n_ + r, it.value());
    }
  K_.resize(dim_, dim_);
  K_.setFromTriplets(trip.begin(), trip.end());
  K_.makeCompressed();
}

void KktSolver::factorize(const Eigen::VectorXd& weights) {
  assemble(weights);
  if (!analyzed_) {
    lu_.analyzePattern(K_);
    analyzed_ = true;
  }
  lu_.factorize(K_);
  ++n_fact_;
  if (lu_.info() != Eigen::Success) {
    factored_ = false;
    throw SingularSystemError("KKT matrix is numerically singular", -1, 0.0);
  }
  factored_ = true;
}

Eigen::VectorXd KktSolver::solve(const Eigen::VectorXd& rhs) const {
  if (!factored_) throw Error("KktSolver::solve before factorize");
  if (rhs.size() != dim_) throw DimensionError("KKT rhs size mismatch");
  Eigen::VectorXd x = lu_.solve(rhs);
  const double rhs_norm = std::max(rhs.norm(), 1e-300);
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd r = rhs - K_ * x;
    if (r.norm() <= 1e-10 * rhs_norm) break;
    x += lu_.solve(r);
  }
  return x;
}

}  // namespace ocmpc
