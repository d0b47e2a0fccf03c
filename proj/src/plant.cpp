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

#include "ocmpc/plant.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "ocmpc/errors.hpp"

namespace ocmpc {

namespace {
constexpr double kDecisionTol = 1e-6;

std::string entry_name(const char* what, int p, int m) {
  return std::string(what) + "(p=" + std::to_string(p + 1) +
         ", m=" + std::to_string(m + 1) + ")";
}
}  // namespace

double step_loss_cost(const Eigen::MatrixXd& loss, const Eigen::VectorXd& k) {
  double cost = 0.0;
  for (int m = 0; m < loss.cols(); ++m)
    for (int p = 0; p < loss.rows(); ++p) cost += loss(p, m) * k[p];
  return cost;
}

Plant::Plant(const SystemConfig& config, const Eigen::MatrixXd& init_w)
    : cfg_(config) {
  cfg_.validate();
  if (init_w.rows() != cfg_.P || init_w.cols() != cfg_.M)
    throw DimensionError("init_w must be P x M");
  if (cfg_.P * cfg_.Q0 > cfg_.Q_bar + 1e-12)
    throw ConfigError("initial occupancy P*Q0 exceeds the modem capacity");
  Q_ = Eigen::MatrixXd::Constant(cfg_.P, cfg_.M, cfg_.Q0);
  prev_w_ = init_w;
}

ObservedState Plant::apply(const ControllerDecision& decision,
                           const Eigen::VectorXd& realized_F) {
  const int P = cfg_.P, M = cfg_.M;
  if (decision.w.rows() != P || decision.w.cols() != M ||
      decision.f_in.rows() != P || decision.f_in.cols() != M)
    throw PlantRejectError("decision matrices must be P x M");
  if (realized_F.size() != P)
    throw PlantRejectError("realized arrivals must have P entries");

  // Admission checks; the violated entry is named.
  for (int m = 0; m < M; ++m) {
    double wsum = 0.0;
    for (int p = 0; p < P; ++p) {
      const double w = decision.w(p, m);
      if (w < -kDecisionTol || w > 1.0 + kDecisionTol)
        throw PlantRejectError("weight out of [0,1] at " +
                               entry_name("w", p, m));
      if (std::abs(w - prev_w_(p, m)) > cfg_.dw_bar + kDecisionTol)
        throw PlantRejectError("ramp bound violated at " +
                               entry_name("w", p, m));
      if (decision.f_in(p, m) < -kDecisionTol)
        throw PlantRejectError("negative inflow at " +
                               entry_name("f_in", p, m));
      wsum += w;
    }
    if (std::abs(wsum - 1.0) > kDecisionTol)
      throw PlantRejectError("weights of modem m=" + std::to_string(m + 1) +
                             " sum to " + std::to_string(wsum));
  }

  ObservedState obs;
  obs.Q.resize(P, M);
  obs.dQ.resize(P, M);
  obs.loss.resize(P, M);
  obs.f_out.resize(P, M);
  obs.realized_F = realized_F;

  // Drop order on overflow: cheapest loss cost first; ties broken toward
  // the larger priority index.
  std::vector<int> drop_order(P);
  std::iota(drop_order.begin(), drop_order.end(), 0);
  std::stable_sort(drop_order.begin(), drop_order.end(), [&](int a, int b) {
    if (cfg_.k[a] != cfg_.k[b]) return cfg_.k[a] < cfg_.k[b];
    return a > b;
  });

  for (int m = 0; m < M; ++m) {
    Eigen::VectorXd avail(P), request(P);
    for (int p = 0; p < P; ++p) {
      avail[p] = Q_(p, m) + decision.f_in(p, m);
      request[p] = std::min(std::max(decision.w(p, m), 0.0) / cfg_.ds,
                            avail[p]);
    }
    const double total_request = request.sum();
    if (total_request > cfg_.C_bar)
      request *= cfg_.C_bar / total_request;

    Eigen::VectorXd kept(P);
    for (int p = 0; p < P; ++p) kept[p] = avail[p] - request[p];

    double excess = kept.sum() - cfg_.Q_bar;
    if (excess > 0.0) {
      for (int p : drop_order) {
        const double drop = std::min(kept[p], excess);
        kept[p] -= drop;
        excess -= drop;
        if (excess <= 0.0) break;
      }
    }

    for (int p = 0; p < P; ++p) {
      const double f_out = request[p];
      double q_new = kept[p];
      double dq = q_new - Q_(p, m);
      const double flow_net = decision.f_in(p, m) - f_out;
      double loss = flow_net - dq;
      if (loss < 0.0) {
        // Sub-ulp closure: report a zero loss and keep the balance
        // identity exact by charging the residue to the queue delta.
        loss = 0.0;
        dq = flow_net;
        q_new = Q_(p, m) + dq;
        if (q_new < 0.0) q_new = 0.0;
      }
      obs.f_out(p, m) = f_out;
      obs.Q(p, m) = q_new;
      obs.dQ(p, m) = dq;
      obs.loss(p, m) = loss;
      Q_(p, m) = q_new;
    }
  }

  cumulative_cost_ += step_loss_cost(obs.loss, cfg_.k);
  prev_w_ = decision.w;
  ++step_;
  return obs;
}

}  // namespace ocmpc
