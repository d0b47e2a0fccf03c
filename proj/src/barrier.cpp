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

#include "ocmpc/barrier.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>

namespace ocmpc {
namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();
// Equality-implied rows with |constant slack| below this (scaled) are
// treated as tight; below the negative threshold they are infeasible.
constexpr double kImplicitTightTol = 1e-6;
constexpr double kImplicitInfeasTol = 1e-7;

double row_scale(double d) { return std::max(1.0, std::abs(d)); }

}  // namespace

BarrierProblem::BarrierProblem(StackedProblem stacked, double eta,
                               KktKernel kernel, bool presolve)
    : sp_(std::move(stacked)), eta_(eta), kernel_(kernel), presolve_(presolve) {
  if (eta_ <= 0.0) throw ConfigError("barrier parameter eta must be positive");
  const long m = sp_.C.rows();
  span_combo_.assign(m, {});
  in_span_.assign(m, 0);
  kept_.assign(m, 1);
  if (presolve_) {
    const bool tagged = sp_.ineq_rows.size() == static_cast<size_t>(m) &&
                        sp_.eq_rows.size() == static_cast<size_t>(sp_.A.rows());
    if (tagged)
      build_span_catalog_();
    else
      build_span_algebraic_();
  }
  classify_();
}

void BarrierProblem::set_eta(double eta) {
  if (eta <= 0.0) throw ConfigError("barrier parameter eta must be positive");
  eta_ = eta;
}

void BarrierProblem::build_span_catalog_() {
  // Index the equality rows that can imply inequality rows.
  const VariableLayout& lay = sp_.layout;
  const int P = lay.priorities(), M = lay.modems(), H = lay.horizon();
  auto flat_mt = [&](int m, int tau) { return tau * M + m; };
  auto flat_pm = [&](int p, int m) { return m * P + p; };
  auto flat_pt = [&](int p, int tau) { return tau * P + p; };
  std::vector<long> simplex(M * (H + 1), -1), init(P * M, -1),
      term(P * M, -1), demand(P * (H + 1), -1);
  for (size_t i = 0; i < sp_.eq_rows.size(); ++i) {
    const EqRow& r = sp_.eq_rows[i];
    switch (r.kind) {
      case EqKind::kWeightSimplex: simplex[flat_mt(r.m, r.tau)] = i; break;
      case EqKind::kQueueInit: init[flat_pm(r.p, r.m)] = i; break;
      case EqKind::kQueueTerminal: term[flat_pm(r.p, r.m)] = i; break;
      case EqKind::kDemandMatch: demand[flat_pt(r.p, r.tau)] = i; break;
      default: break;
    }
  }
  const bool pinned = std::any_of(sp_.eq_rows.begin(), sp_.eq_rows.end(),
                                  [](const EqRow& r) {
                                    return r.kind == EqKind::kQueueTerminal;
                                  });

  auto set_combo = [&](long row, std::vector<std::pair<long, double>> combo) {
    for (const auto& [idx, coef] : combo)
      if (idx < 0) return;  // needed equality row was eliminated; skip
    in_span_[row] = 1;
    span_combo_[row] = std::move(combo);
  };

  for (long i = 0; i < sp_.C.rows(); ++i) {
    const IneqRow& r = sp_.ineq_rows[i];
    switch (r.kind) {
      case IneqKind::kWeightUpper:
        if (P == 1) set_combo(i, {{simplex[flat_mt(r.m, r.tau)], 1.0}});
        break;
      case IneqKind::kWeightLower:
        if (P == 1) set_combo(i, {{simplex[flat_mt(r.m, r.tau)], -1.0}});
        break;
      case IneqKind::kRampUpper:
        if (P == 1) {
          if (r.tau == 0)
            set_combo(i, {{simplex[flat_mt(r.m, 0)], 1.0}});
          else
            set_combo(i, {{simplex[flat_mt(r.m, r.tau)], 1.0},
                          {simplex[flat_mt(r.m, r.tau - 1)], -1.0}});
        }
        break;
      case IneqKind::kRampLower:
        if (P == 1) {
          if (r.tau == 0)
            set_combo(i, {{simplex[flat_mt(r.m, 0)], -1.0}});
          else
            set_combo(i, {{simplex[flat_mt(r.m, r.tau)], -1.0},
                          {simplex[flat_mt(r.m, r.tau - 1)], 1.0}});
        }
        break;
      case IneqKind::kQueueLower:
        if (r.tau == 0)
          set_combo(i, {{init[flat_pm(r.p, r.m)], -1.0}});
        else if (pinned && r.tau == H)
          set_combo(i, {{term[flat_pm(r.p, r.m)], -1.0}});
        break;
      case IneqKind::kQueueCapacity:
        if (r.tau == 0 || (pinned && r.tau == H)) {
          std::vector<std::pair<long, double>> combo;
          for (int p = 0; p < P; ++p)
            combo.emplace_back(r.tau == 0 ? init[flat_pm(p, r.m)]
                                          : term[flat_pm(p, r.m)],
                               1.0);
          set_combo(i, std::move(combo));
        }
        break;
      case IneqKind::kFlowInLower:
        if (M == 1) set_combo(i, {{demand[flat_pt(r.p, r.tau)], -1.0}});
        break;
      default:
        break;
    }
  }
}

void BarrierProblem::build_span_algebraic_() {
  if (sp_.A.rows() == 0) return;  // nothing can be equality-implied
  if (sp_.A.rows() > 3000)
    throw Error("algebraic row classification needs tagged rows at this size");
  const Eigen::MatrixXd At = Eigen::MatrixXd(sp_.A).transpose();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(At);
  for (long i = 0; i < sp_.C.rows(); ++i) {
    Eigen::VectorXd ci = Eigen::VectorXd::Zero(sp_.C.cols());
    for (SpMat::InnerIterator it(sp_.C, i); it; ++it) ci[it.col()] = it.value();
    const Eigen::VectorXd y = qr.solve(ci);
    const double res = (At * y - ci).norm();
    if (res <= 1e-9 * std::max(1.0, ci.norm())) {
      in_span_[i] = 1;
      std::vector<std::pair<long, double>> combo;
      for (long j = 0; j < y.size(); ++j)
        if (std::abs(y[j]) > 1e-12) combo.emplace_back(j, y[j]);
      span_combo_[i] = std::move(combo);
    }
  }
}

void BarrierProblem::classify_() {
  kept_.assign(sp_.C.rows(), 1);
  kept_count_ = sp_.C.rows();
  if (!presolve_) return;
  for (long i = 0; i < sp_.C.rows(); ++i) {
    if (!in_span_[i]) continue;
    double constant = sp_.d[i];
    for (const auto& [idx, coef] : span_combo_[i]) constant -= coef * sp_.b[idx];
    const double scale = row_scale(sp_.d[i]);
    if (constant < -kImplicitInfeasTol * scale)
      throw InfeasibleError(
          "equality-implied inequality row " + std::to_string(i) +
              " is violated by " + std::to_string(-constant),
          constant);
    if (constant <= kImplicitTightTol * scale) {
      kept_[i] = 0;
      --kept_count_;
    }
  }
}

void BarrierProblem::update_rhs(const Eigen::VectorXd& b,
                                const Eigen::VectorXd& d) {
  if (b.size() != sp_.b.size() || d.size() != sp_.d.size())
    throw DimensionError("rhs size mismatch in update");
  sp_.b = b;
  sp_.d = d;
  classify_();
}

void BarrierProblem::update_b(const Eigen::VectorXd& b) {
  if (b.size() != sp_.b.size())
    throw DimensionError("rhs size mismatch in update");
  sp_.b = b;
  classify_();
}

Eigen::VectorXd BarrierProblem::slacks(const Eigen::VectorXd& x) const {
  Eigen::VectorXd s = sp_.d - sp_.C * x;
  for (long i = 0; i < s.size(); ++i)
    if (!kept_[i]) s[i] = kInfinity;
  return s;
}

double BarrierProblem::min_slack(const Eigen::VectorXd& x) const {
  return slacks(x).minCoeff();
}

double BarrierProblem::value(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd s = sp_.d - sp_.C * x;
  double barrier = 0.0;
  for (long i = 0; i < s.size(); ++i) {
    if (!kept_[i]) continue;
    if (s[i] <= 0.0)
      throw NotInteriorError("point not interior at inequality row " +
                                 std::to_string(i),
                             i, s[i]);
    barrier -= std::log(s[i]);
  }
  return eta_ * sp_.c.dot(x) + barrier;
}

Eigen::VectorXd BarrierProblem::gradient(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd s = sp_.d - sp_.C * x;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (long i = 0; i < s.size(); ++i) {
    if (!kept_[i]) continue;
    if (s[i] <= 0.0)
      throw NotInteriorError("point not interior at inequality row " +
                                 std::to_string(i),
                             i, s[i]);
    inv[i] = 1.0 / s[i];
  }
  return eta_ * sp_.c + sp_.C.transpose() * inv;
}

Eigen::VectorXd BarrierProblem::hessian_weights(
    const Eigen::VectorXd& slacks) const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(slacks.size());
  for (long i = 0; i < slacks.size(); ++i) {
    if (!kept_[i]) continue;
    if (slacks[i] <= 0.0)
      throw NotInteriorError("point not interior at inequality row " +
                                 std::to_string(i),
                             i, slacks[i]);
    w[i] = 1.0 / (slacks[i] * slacks[i]);
  }
  return w;
}

KktSolver& BarrierProblem::kkt() {
  if (!kkt_) kkt_ = std::make_unique<KktSolver>(sp_.A, sp_.C);
  return *kkt_;
}

long BarrierProblem::factorizations() const {
  return (kkt_ ? kkt_->factorizations() : 0) + dense_factorizations_;
}

Eigen::VectorXd BarrierProblem::solve_kkt(const Eigen::VectorXd& weights,
                                          const Eigen::VectorXd& rhs) {
  if (kernel_ == KktKernel::kSparse) {
    KktSolver& solver = kkt();
    solver.factorize(weights);
    return solver.solve(rhs);
  }
  // Dense route through the Bunch-Kaufman factorization.
  const long n = sp_.C.cols();
  const long mA = sp_.A.rows();
  const Eigen::MatrixXd Cd = Eigen::MatrixXd(sp_.C);
  const Eigen::MatrixXd Ad = Eigen::MatrixXd(sp_.A);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + mA, n + mA);
  K.topLeftCorner(n, n) = Cd.transpose() * weights.asDiagonal() * Cd;
  K.topRightCorner(n, mA) = Ad.transpose();
  K.bottomLeftCorner(mA, n) = Ad;
  ++dense_factorizations_;
  return dense_symmetric_solve(K, rhs);
}

BarrierEval barrier_eval(const Eigen::VectorXd& x, const StackedProblem& sp,
                         double eta, bool with_hessian) {
  if (x.size() != sp.C.cols()) throw DimensionError("x size mismatch");
  const Eigen::VectorXd s = sp.d - sp.C * x;
  for (long i = 0; i < s.size(); ++i)
    if (s[i] <= 0.0)
      throw NotInteriorError("point not interior at inequality row " +
                                 std::to_string(i),
                             i, s[i]);
  BarrierEval out;
  out.value = eta * sp.c.dot(x) - s.array().log().sum();
  out.gradient = eta * sp.c + sp.C.transpose() * s.cwiseInverse();
  if (with_hessian) {
    const long n = x.size();
    out.hessian = Eigen::MatrixXd::Zero(n, n);
    for (long i = 0; i < s.size(); ++i) {
      const double w = 1.0 / (s[i] * s[i]);
      for (SpMat::InnerIterator it1(sp.C, i); it1; ++it1)
        for (SpMat::InnerIterator it2(sp.C, i); it2; ++it2)
          out.hessian(it1.col(), it2.col()) += w * it1.value() * it2.value();
    }
  }
  return out;
}

Eigen::VectorXd barrier_hessian_product(const Eigen::VectorXd& x,
                                        const StackedProblem& sp,
                                        const Eigen::VectorXd& v) {
  const Eigen::VectorXd s = sp.d - sp.C * x;
  for (long i = 0; i < s.size(); ++i)
    if (s[i] <= 0.0)
      throw NotInteriorError("point not interior at inequality row " +
                                 std::to_string(i),
                             i, s[i]);
  const Eigen::VectorXd cv = sp.C * v;
  return sp.C.transpose() * (cv.array() / (s.array() * s.array())).matrix();
}

namespace {

// Largest t with all kept slacks positive along x + t * step.
double fraction_to_boundary(const BarrierProblem& problem,
                            const Eigen::VectorXd& slacks,
                            const Eigen::VectorXd& c_step) {
  double t_max = kInfinity;
  for (long i = 0; i < c_step.size(); ++i) {
    if (!problem.kept()[i]) continue;
    if (c_step[i] > 0.0) t_max = std::min(t_max, slacks[i] / c_step[i]);
  }
  return t_max;
}

}  // namespace

StepResult newton_kkt_step(const Eigen::VectorXd& x, BarrierProblem& problem,
                           const Eigen::VectorXd& b) {
  const StackedProblem& sp = problem.stacked();
  if (x.size() != sp.C.cols()) throw DimensionError("x size mismatch");
  if (b.size() != sp.b.size()) throw DimensionError("b size mismatch");
  if (&b != &problem.b() && (b - problem.b()).squaredNorm() != 0.0)
    problem.update_b(b);

  const long n = x.size();
  const long mA = sp.A.rows();
  const Eigen::VectorXd s = problem.slacks(x);
  const Eigen::VectorXd weights = problem.hessian_weights(s);
  const Eigen::VectorXd grad = problem.gradient(x);

  Eigen::VectorXd rhs(n + mA);
  rhs.head(n) = grad;
  rhs.tail(mA) = sp.A * x - b;
  const Eigen::VectorXd sol = problem.solve_kkt(weights, rhs);
  const Eigen::VectorXd u = sol.head(n);
  const Eigen::VectorXd w = sol.tail(mA);

  // Step direction is -u; damp to stay strictly interior.
  const Eigen::VectorXd c_dir = -(sp.C * u);  // slack change is -alpha*c_dir
  const double t_max = fraction_to_boundary(problem, s, c_dir);
  const double alpha = std::min(1.0, 0.99 * t_max);

  StepResult res;
  res.x_next = x - alpha * u;
  res.dual = -w;
  res.alpha = alpha;
  const Eigen::VectorXd cu = sp.C * u;
  double decrement_sq = 0.0;
  for (long i = 0; i < cu.size(); ++i) decrement_sq += weights[i] * cu[i] * cu[i];
  res.newton_decrement = std::sqrt(std::max(0.0, decrement_sq));
  res.primal_residual = (sp.A * res.x_next - b).norm();
  res.min_slack = problem.min_slack(res.x_next);
  res.residual_scaled = kkt_residual_scaled(res.x_next, res.dual, problem);
  return res;
}

double kkt_residual_scaled(const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                           BarrierProblem& problem) {
  const StackedProblem& sp = problem.stacked();
  const Eigen::VectorXd r_dual =
      problem.gradient(x) + sp.A.transpose() * nu;
  const double dual_scale = std::max(1.0, problem.eta() * sp.c.norm());
  const double pri_scale = std::max(1.0, problem.b().norm());
  const double r_pri = (sp.A * x - problem.b()).norm();
  return std::max(r_dual.norm() / dual_scale, r_pri / pri_scale);
}

CenteringResult solve_centering(BarrierProblem& problem,
                                const Eigen::VectorXd& x0,
                                const Eigen::VectorXd& b, double tol,
                                int max_iter, double decrement_cap) {
  const StackedProblem& sp = problem.stacked();
  if ((b - problem.b()).squaredNorm() != 0.0) problem.update_b(b);
  const long n = x0.size();
  const long mA = sp.A.rows();

  Eigen::VectorXd x = x0;
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(mA);
  const double pri_scale = std::max(1.0, b.norm());
  const double dual_scale = std::max(1.0, problem.eta() * sp.c.norm());

  auto residual_norm = [&](const Eigen::VectorXd& xx,
                           const Eigen::VectorXd& nn) {
    const Eigen::VectorXd rd = problem.gradient(xx) + sp.A.transpose() * nn;
    const Eigen::VectorXd rp = sp.A * xx - b;
    return std::sqrt(rd.squaredNorm() + rp.squaredNorm());
  };

  CenteringResult out;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd s = problem.slacks(x);
    const Eigen::VectorXd weights = problem.hessian_weights(s);
    const Eigen::VectorXd grad = problem.gradient(x);

    Eigen::VectorXd rhs(n + mA);
    rhs.head(n) = grad;
    rhs.tail(mA) = sp.A * x - b;
    const Eigen::VectorXd sol = problem.solve_kkt(weights, rhs);
    const Eigen::VectorXd dx = -sol.head(n);
    const Eigen::VectorXd nu_next = -sol.tail(mA);

    const Eigen::VectorXd c_dx = sp.C * dx;
    double dec_sq = 0.0;
    for (long i = 0; i < c_dx.size(); ++i) dec_sq += weights[i] * c_dx[i] * c_dx[i];
    const double decrement = std::sqrt(std::max(0.0, dec_sq));
    const double primal = rhs.tail(mA).norm();

    out.x = x;
    out.dual = nu_next;
    out.iterations = iter + 1;
    out.primal_residual = primal;
    out.newton_decrement = decrement;
    if (primal <= tol * pri_scale && decrement <= tol * dual_scale &&
        decrement <= decrement_cap)
      return out;

    // Backtracking on the full residual norm, fraction-to-boundary first.
    double t_boundary = kInfinity;
    for (long i = 0; i < c_dx.size(); ++i) {
      if (!problem.kept()[i]) continue;
      if (c_dx[i] > 0.0) t_boundary = std::min(t_boundary, s[i] / c_dx[i]);
    }
    double t = std::min(1.0, 0.99 * t_boundary);
    const Eigen::VectorXd dnu = nu_next - nu;
    const double r0 = residual_norm(x, nu);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd x_try = x + t * dx;
      if (problem.min_slack(x_try) > 0.0 &&
          residual_norm(x_try, nu + t * dnu) <= (1.0 - 0.4 * t) * r0) {
        x = x_try;
        nu += t * dnu;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted)
      throw IterationLimitError("centering line search stalled", primal,
                                decrement);
  }
  throw IterationLimitError("centering iteration cap exceeded",
                            out.primal_residual, out.newton_decrement);
}

PathResult solve_to_optimality(const StackedProblem& sp,
                               const Eigen::VectorXd& b, double mu,
                               double eta0, double tol, KktKernel kernel) {
  if (mu <= 1.0) throw ConfigError("barrier path needs mu > 1");
  BarrierProblem problem(sp, eta0, kernel);
  problem.update_b(b);
  Eigen::VectorXd x = phase_one(sp, b, 1e-3, kernel);

  PathResult out;
  double eta = eta0;
  const double cap = 0.1 * std::sqrt(std::max<double>(1, problem.kept_count()));
  // Path length bound: gap shrinks by mu each stage.
  for (int stage = 0; stage < 64; ++stage) {
    problem.set_eta(eta);
    const CenteringResult center = solve_centering(problem, x, b, 1e-8, 200, cap);
    x = center.x;
    ++out.centerings;
    const double objective = sp.c.dot(x);
    const double gap = problem.kept_count() / eta;
    if (gap <= tol * (1.0 + std::abs(objective))) {
      out.x = x;
      out.objective = objective;
      out.eta_final = eta;
      out.gap_bound = gap;
      return out;
    }
    eta *= mu;
  }
  throw IterationLimitError("barrier path failed to close the duality gap",
                            (sp.A * x - b).norm(), 0.0);
}

namespace {

// Reads the anchor scenario back off the tagged rows (demand from the
// flow-matching rows, observed queues from the initial pins, prev_w and
// dw_bar from the tau=0/tau=1 ramp bounds, ds from the service-cap
// coefficient, capacities from the cap rows) and rebuilds the standard
// interior anchor from them.
std::optional<Eigen::VectorXd> anchor_from_tags(const StackedProblem& sp,
                                                const Eigen::VectorXd& b) {
  const VariableLayout& lay = sp.layout;
  const int P = lay.priorities(), M = lay.modems(), H = lay.horizon();
  if (sp.eq_rows.size() != static_cast<size_t>(sp.A.rows()) ||
      sp.ineq_rows.size() != static_cast<size_t>(sp.C.rows()))
    return std::nullopt;
  if (lay.size() != sp.C.cols()) return std::nullopt;

  Eigen::MatrixXd demand = Eigen::MatrixXd::Constant(P, H + 1, -1.0);
  Eigen::MatrixXd observed = Eigen::MatrixXd::Constant(P, M, -1.0);
  bool pinned = false;
  for (size_t i = 0; i < sp.eq_rows.size(); ++i) {
    const EqRow& r = sp.eq_rows[i];
    if (r.kind == EqKind::kDemandMatch) demand(r.p, r.tau) = b[i];
    if (r.kind == EqKind::kQueueInit) observed(r.p, r.m) = b[i];
    if (r.kind == EqKind::kQueueTerminal) pinned = true;
  }
  Eigen::MatrixXd ramp0 = Eigen::MatrixXd::Constant(P, M, -1.0);
  double dw_bar = -1.0, ds = -1.0, c_bar = -1.0, q_bar = -1.0;
  for (size_t i = 0; i < sp.ineq_rows.size(); ++i) {
    const IneqRow& r = sp.ineq_rows[i];
    if (r.kind == IneqKind::kRampUpper && r.tau == 0) ramp0(r.p, r.m) = sp.d[i];
    if (r.kind == IneqKind::kRampUpper && r.tau == 1 && dw_bar < 0.0)
      dw_bar = sp.d[i];
    if (r.kind == IneqKind::kBandwidthCap && c_bar < 0.0) c_bar = sp.d[i];
    if (r.kind == IneqKind::kQueueCapacity && q_bar < 0.0) q_bar = sp.d[i];
    if (r.kind == IneqKind::kServiceCap && ds < 0.0) {
      for (SpMat::InnerIterator it(sp.C, static_cast<long>(i)); it; ++it) {
        const auto [fam, p, m, tau] = lay.inverse(it.col());
        if (fam == Var::kWeight) ds = -1.0 / it.value();
      }
    }
  }
  if (dw_bar < 0.0 || ds <= 0.0 || c_bar <= 0.0 || q_bar <= 0.0)
    return std::nullopt;
  if ((demand.array() < 0.0).any() || (observed.array() < 0.0).any() ||
      (ramp0.array() < 0.0).any())
    return std::nullopt;

  SystemConfig cfg;
  cfg.P = P;
  cfg.M = M;
  cfg.W = H;
  cfg.T = H + 1;
  cfg.k = Eigen::VectorXd::Ones(P);  // unused by the anchor
  cfg.Q_bar = q_bar;
  cfg.Q0 = 0.0;
  cfg.dw_bar = std::min(dw_bar, 1.0);
  cfg.ds = ds;
  cfg.C_bar = c_bar;
  cfg.eta = 1.0;
  const Eigen::MatrixXd prev_w =
      (ramp0 - Eigen::MatrixXd::Constant(P, M, dw_bar))
          .cwiseMax(0.0)
          .cwiseMin(1.0);
  try {
    return interior_anchor(cfg, lay, observed, demand, prev_w,
                           pinned ? TerminalMode::kPinned
                                  : TerminalMode::kFree);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Max-min-slack auxiliary problem over (x, s): maximize s subject to
// Ax = b and Cx + s <= d over the kept rows, with s capped. Always
// strictly feasible, so it initializes itself; its optimum certifies
// (in)feasibility. Equality-implied rows must stay out: a tight one has
// constant zero slack and would pin the optimum at s = 0.
Eigen::VectorXd phase_one_aux(const StackedProblem& sp,
                              const Eigen::VectorXd& b,
                              const std::vector<char>& kept_rows,
                              double margin, KktKernel kernel) {
  const long n = sp.C.cols();
  const double s_cap = std::max(1.0, 10.0 * margin);

  StackedProblem aux;
  aux.layout = sp.layout;  // layout unused by the solver internals
  aux.c = Eigen::VectorXd::Zero(n + 1);
  aux.c[n] = -1.0;  // maximize s
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (long r = 0; r < sp.A.rows(); ++r)
      for (SpMat::InnerIterator it(sp.A, r); it; ++it)
        trip.emplace_back(r, it.col(), it.value());
    aux.A.resize(sp.A.rows(), n + 1);
    aux.A.setFromTriplets(trip.begin(), trip.end());
  }
  aux.b = b;
  long m = 0;
  {
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> d_rows;
    for (long r = 0; r < sp.C.rows(); ++r) {
      if (!kept_rows[r]) continue;
      for (SpMat::InnerIterator it(sp.C, r); it; ++it)
        trip.emplace_back(m, it.col(), it.value());
      trip.emplace_back(m, n, 1.0);
      d_rows.push_back(sp.d[r]);
      ++m;
    }
    trip.emplace_back(m, n, 1.0);  // s <= s_cap
    d_rows.push_back(s_cap);
    aux.C.resize(m + 1, n + 1);
    aux.C.setFromTriplets(trip.begin(), trip.end());
    aux.d = Eigen::Map<Eigen::VectorXd>(d_rows.data(),
                                        static_cast<long>(d_rows.size()));
  }
  // no row tags: the solver treats every row plainly, and the slack
  // variable keeps each one strictly satisfiable
  BarrierProblem problem(aux, 10.0, kernel, /*presolve=*/false);

  // Least-squares equality point via the normal equations (A has full
  // row rank after elimination).
  Eigen::VectorXd x_ls = Eigen::VectorXd::Zero(n);
  if (sp.A.rows() > 0) {
    Eigen::SparseMatrix<double> AAt =
        (sp.A * SpMat(sp.A.transpose())).pruned();
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(AAt);
    if (ldlt.info() != Eigen::Success)
      throw SingularSystemError("equality normal equations not factorizable",
                                -1, 0.0);
    x_ls = sp.A.transpose() * ldlt.solve(b);
  }

  Eigen::VectorXd z(n + 1);
  z.head(n) = x_ls;
  double min_slack0 = s_cap;
  {
    const Eigen::VectorXd s0 = sp.d - sp.C * x_ls;
    for (long r = 0; r < sp.C.rows(); ++r)
      if (kept_rows[r]) min_slack0 = std::min(min_slack0, s0[r]);
  }
  z[n] = std::min(min_slack0, s_cap) - 1.0;

  double eta = 10.0;
  const double gap_tol = 0.1 * margin;
  const double cap = 0.1 * std::sqrt(static_cast<double>(m + 1));
  for (int stage = 0; stage < 64; ++stage) {
    problem.set_eta(eta);
    const CenteringResult center = solve_centering(problem, z, b, 1e-8, 200, cap);
    z = center.x;
    if ((m + 1) / eta <= gap_tol) break;
    eta *= 20.0;
  }
  const double s_star = z[n];
  if (s_star <= gap_tol)
    throw InfeasibleError(
        "no strictly interior point: best achievable min slack is " +
            std::to_string(s_star),
        s_star);
  return z.head(n);
}

}  // namespace

Eigen::VectorXd phase_one(const StackedProblem& sp, const Eigen::VectorXd& b,
                          double margin, KktKernel kernel,
                          const Eigen::VectorXd* anchor_hint) {
  // Constructing the problem also certifies equality-implied rows.
  BarrierProblem problem(sp, 1.0, kernel);
  problem.update_b(b);

  std::optional<Eigen::VectorXd> anchor;
  if (anchor_hint != nullptr)
    anchor = *anchor_hint;
  else
    anchor = anchor_from_tags(sp, b);

  if (anchor) {
    const double eq_res = (sp.A * *anchor - b).norm();
    if (eq_res <= 1e-8 * std::max(1.0, b.norm()) &&
        problem.min_slack(*anchor) > 0.0) {
      try {
        const CenteringResult center =
            solve_centering(problem, *anchor, b, 1e-6, 60);
        if (problem.min_slack(center.x) >= margin) return center.x;
        if (problem.min_slack(*anchor) >= margin) return *anchor;
      } catch (const Error&) {
        // fall through to the auxiliary construction
      }
    }
  }
  return phase_one_aux(sp, b, problem.kept(), margin, kernel);
}

}  // namespace ocmpc
