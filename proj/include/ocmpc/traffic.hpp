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

#ifndef OCMPC_TRAFFIC_HPP_
#define OCMPC_TRAFFIC_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "ocmpc/errors.hpp"
#include "ocmpc/rng.hpp"

namespace ocmpc {

/// Markov-modulated Poisson traffic model. The chain state selects a
/// base rate; priority p receives Poisson arrivals with the base rate
/// divided by its loss cost k_p, so expensive classes see less traffic.
struct MmppConfig {
  int S = 1;               ///< chain states
  Eigen::MatrixXd Pmat;    ///< S x S row-stochastic transition matrix
  Eigen::VectorXd lambda;  ///< per-state base rate (packets/step)
  Eigen::VectorXd k;       ///< per-priority loss costs used to scale rates

  void validate() const;
};

/// One realized traffic sample path. States are 0-based in memory and
/// 1-based in the CSV export.
struct TrafficTrace {
  Eigen::VectorXi states;    ///< length T
  Eigen::MatrixXd arrivals;  ///< T x P integer packet counts
};

/// One chain transition from `state` (0-based).
int step_chain(int state, const Eigen::MatrixXd& Pmat, RngStream& rng);

/// Per-priority Poisson counts at the given chain state.
Eigen::VectorXd sample_arrivals(int state, const MmppConfig& cfg,
                                RngStream& rng);

/// Expected per-priority demand over a look-ahead horizon. Entry (p, j)
/// is the mean arrival count j steps ahead: exact for j = 0 (state is
/// known), the chain-expected rate e_state P^j lambda / k_p for j > 0.
Eigen::MatrixXd forecast(int state, int horizon, const MmppConfig& cfg);

/// Stationary distribution of a row-stochastic matrix: pi >= 0,
/// sum(pi) = 1, pi P = pi within 1e-10. Throws SingularSystemError when
/// the chain does not determine a unique distribution.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& Pmat);

/// Samples states and arrivals for T steps starting from
/// `initial_state`.
TrafficTrace generate_trace(const MmppConfig& cfg, int T, int initial_state,
                            RngStream& rng);

/// FNV-1a over the trace bytes; used to assert that every method inside
/// a Monte Carlo run consumed the identical trace.
std::uint64_t trace_hash(const TrafficTrace& trace);

/// Columns: t,state,arrivals_p1..arrivals_pP (state 1-based).
void write_trace_csv(const TrafficTrace& trace, const std::string& path);

}  // namespace ocmpc

#endif  // OCMPC_TRAFFIC_HPP_
