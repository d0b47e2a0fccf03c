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

#include "ocmpc/traffic.hpp"

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>

namespace ocmpc {

void MmppConfig::validate() const {
  if (S < 1) throw ConfigError("mmpp.S must be >= 1");
  if (Pmat.rows() != S || Pmat.cols() != S)
    throw ConfigError("mmpp.P must be S x S");
  if ((Pmat.array() < 0.0).any())
    throw ConfigError("mmpp.P entries must be non-negative");
  for (int i = 0; i < S; ++i)
    if (std::abs(Pmat.row(i).sum() - 1.0) > 1e-12)
      throw ConfigError("mmpp.P row " + std::to_string(i + 1) +
                        " does not sum to 1");
  if (lambda.size() != S) throw ConfigError("mmpp.lambda must have S entries");
  if ((lambda.array() <= 0.0).any())
    throw ConfigError("mmpp.lambda entries must be positive");
  if (k.size() < 1 || (k.array() <= 0.0).any())
    throw ConfigError("loss costs k must be positive");
}

int step_chain(int state, const Eigen::MatrixXd& Pmat, RngStream& rng) {
  if (state < 0 || state >= Pmat.rows())
    throw DimensionError("chain state out of range");
  return rng.categorical(Pmat.row(state));
}

Eigen::VectorXd sample_arrivals(int state, const MmppConfig& cfg,
                                RngStream& rng) {
  if (state < 0 || state >= cfg.S)
    throw DimensionError("chain state out of range");
  Eigen::VectorXd counts(cfg.k.size());
  for (int p = 0; p < cfg.k.size(); ++p)
    counts[p] = static_cast<double>(rng.poisson(cfg.lambda[state] / cfg.k[p]));
  return counts;
}

Eigen::MatrixXd forecast(int state, int horizon, const MmppConfig& cfg) {
  if (state < 0 || state >= cfg.S)
    throw DimensionError("chain state out of range");
  if (horizon < 0) throw DimensionError("forecast horizon must be >= 0");
  const int P = static_cast<int>(cfg.k.size());
  Eigen::MatrixXd out(P, horizon + 1);
  Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(cfg.S);
  dist[state] = 1.0;
  for (int j = 0; j <= horizon; ++j) {
    const double rate = dist * cfg.lambda;
    for (int p = 0; p < P; ++p) out(p, j) = rate / cfg.k[p];
    dist = dist * cfg.Pmat;
  }
  return out;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& Pmat) {
  const long S = Pmat.rows();
  if (S != Pmat.cols() || S < 1)
    throw DimensionError("transition matrix must be square");
  // Stack (P' - I) pi = 0 with the normalization row, solve least squares.
  Eigen::MatrixXd sys(S + 1, S);
  sys.topRows(S) = Pmat.transpose() - Eigen::MatrixXd::Identity(S, S);
  sys.bottomRows(1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(S + 1);
  rhs[S] = 1.0;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sys);
  if (qr.rank() < S)
    throw SingularSystemError(
        "chain has no unique stationary distribution (reducible or periodic)",
        S - qr.rank(), 0.0);
  Eigen::VectorXd pi = qr.solve(rhs);
  const double residual = ((Pmat.transpose() * pi) - pi).norm();
  if (residual > 1e-10 || (pi.array() < -1e-12).any() ||
      std::abs(pi.sum() - 1.0) > 1e-10)
    throw SingularSystemError(
        "chain has no unique stationary distribution (reducible or periodic)",
        0, residual);
  return pi.cwiseMax(0.0);
}

TrafficTrace generate_trace(const MmppConfig& cfg, int T, int initial_state,
                            RngStream& rng) {
  cfg.validate();
  if (T < 1) throw DimensionError("trace length must be >= 1");
  if (initial_state < 0 || initial_state >= cfg.S)
    throw DimensionError("initial chain state out of range");
  TrafficTrace trace;
  trace.states.resize(T);
  trace.arrivals.resize(T, cfg.k.size());
  int state = initial_state;
  for (int t = 0; t < T; ++t) {
    trace.states[t] = state;
    trace.arrivals.row(t) = sample_arrivals(state, cfg, rng).transpose();
    state = step_chain(state, cfg.Pmat, rng);
  }
  return trace;
}

std::uint64_t trace_hash(const TrafficTrace& trace) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix = [&h](const unsigned char* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      h ^= data[i];
      h *= 0x100000001B3ull;
    }
  };
  mix(reinterpret_cast<const unsigned char*>(trace.states.data()),
      trace.states.size() * sizeof(int));
  mix(reinterpret_cast<const unsigned char*>(trace.arrivals.data()),
      trace.arrivals.size() * sizeof(double));
  return h;
}

void write_trace_csv(const TrafficTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "t,state";
  for (int p = 0; p < trace.arrivals.cols(); ++p)
    out << ",arrivals_p" << (p + 1);
  out << "\n";
  for (int t = 0; t < trace.states.size(); ++t) {
    out << t << "," << (trace.states[t] + 1);
    for (int p = 0; p < trace.arrivals.cols(); ++p) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", trace.arrivals(t, p));
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace ocmpc
