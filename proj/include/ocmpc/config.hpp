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

#ifndef OCMPC_CONFIG_HPP_
#define OCMPC_CONFIG_HPP_

#include <Eigen/Core>

#include "ocmpc/errors.hpp"

namespace ocmpc {

/// Scalar parameters of the routing/scheduling problem.
///
/// Units: queue sizes and flows are in packets (fluid, real-valued),
/// time is in scheduler steps, weights are dimensionless fractions.
struct SystemConfig {
  int M = 1;   ///< modem banks
  int P = 1;   ///< priority levels
  int W = 1;   ///< planning window length (steps ahead of the current one)
  int T = 2;   ///< simulation horizon (steps)

  Eigen::VectorXd k;  ///< per-priority packet loss cost, length P

  double Q_bar = 10.0;   ///< per-modem total queue capacity (packets)
  double Q0 = 0.0;       ///< initial/terminal queue occupancy (packets)
  double dw_bar = 0.1;   ///< max per-step scheduler-weight change, in (0,1]
  double ds = 0.5;       ///< scheduler clock; service rate = w/ds packets/step
  double C_bar = 2.0;    ///< per-modem transmission bandwidth (packets/step)
  double eta = 1.0e4;    ///< barrier parameter for the online controller

  /// Throws ConfigError if any invariant is violated.
  void validate() const;
};

inline void SystemConfig::validate() const {
  if (M < 1) throw ConfigError("system.M must be >= 1");
  if (P < 1) throw ConfigError("system.P must be >= 1");
  if (W < 1) throw ConfigError("system.W must be >= 1");
  if (T <= W) throw ConfigError("system.T must exceed system.W");
  if (k.size() != P) throw ConfigError("system.k must have P entries");
  if ((k.array() <= 0.0).any())
    throw ConfigError("system.k entries must be strictly positive");
  if (Q0 < 0.0 || Q_bar < Q0)
    throw ConfigError("require Q_bar >= Q0 >= 0");
  if (dw_bar <= 0.0 || dw_bar > 1.0)
    throw ConfigError("system.dw_bar must lie in (0, 1]");
  if (ds <= 0.0) throw ConfigError("system.ds must be positive");
  if (C_bar <= 0.0) throw ConfigError("system.C_bar must be positive");
  if (eta <= 0.0) throw ConfigError("system.eta must be positive");
}

}  // namespace ocmpc

#endif  // OCMPC_CONFIG_HPP_
