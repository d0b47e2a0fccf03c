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

#ifndef OCMPC_PLANT_HPP_
#define OCMPC_PLANT_HPP_

#include <Eigen/Core>

#include "ocmpc/config.hpp"

namespace ocmpc {

/// What a controller hands to the plant each step.
struct ControllerDecision {
  Eigen::MatrixXd w;     ///< P x M scheduler weights, simplex per modem
  Eigen::MatrixXd f_in;  ///< P x M routed inflow (packets)
};

/// Plant feedback after one step. The reported quantities satisfy
/// ((f_in - f_out) - dQ) - loss == 0 exactly in that evaluation order.
struct ObservedState {
  Eigen::MatrixXd Q;           ///< queue occupancy after the step
  Eigen::MatrixXd dQ;          ///< occupancy change over the step
  Eigen::MatrixXd loss;        ///< packets dropped this step
  Eigen::MatrixXd f_out;       ///< packets transmitted this step
  Eigen::VectorXd realized_F;  ///< realized arrivals per priority
};

/// Loss cost of one step, accumulated modem-major then priority. Both
/// the plant counter and any external audit must use this same routine
/// so the two aggregate bit-identically.
double step_loss_cost(const Eigen::MatrixXd& loss, const Eigen::VectorXd& k);

/// The ground-truth environment. Queues hold fluid packets; service per
/// priority is capped by the denormalized weight w/ds and the available
/// packets, the modem total by the bandwidth; queue overflow drops the
/// cheapest loss-cost classes first.
class Plant {
 public:
  /// Queues start at Q0 per (p, m); ramp checks run against `init_w`.
  Plant(const SystemConfig& config, const Eigen::MatrixXd& init_w);

  /// Applies a (post-correction) decision. Rejects decisions violating
  /// the weight simplex, bounds, the ramp bound against the previously
  /// implemented weights, or non-negativity; names the violated entry.
  ObservedState apply(const ControllerDecision& decision,
                      const Eigen::VectorXd& realized_F);

  const Eigen::MatrixXd& queues() const { return Q_; }
  const Eigen::MatrixXd& implemented_w() const { return prev_w_; }
  double cumulative_loss_cost() const { return cumulative_cost_; }
  int step_index() const { return step_; }

 private:
  SystemConfig cfg_;
  Eigen::MatrixXd Q_;       // P x M
  Eigen::MatrixXd prev_w_;  // last implemented weights
  double cumulative_cost_ = 0.0;
  int step_ = 0;
};

}  // namespace ocmpc

#endif  // OCMPC_PLANT_HPP_
