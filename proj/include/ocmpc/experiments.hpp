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

#ifndef OCMPC_EXPERIMENTS_HPP_
#define OCMPC_EXPERIMENTS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ocmpc/config.hpp"
#include "ocmpc/controllers.hpp"
#include "ocmpc/traffic.hpp"

namespace ocmpc {

/// Everything one campaign needs. `methods` entries come from
/// {"batch", "mpc", "ocmpc", "proportional"}.
struct ExperimentSpec {
  SystemConfig system;
  MmppConfig mmpp;
  int runs = 1;
  std::uint64_t master_seed = 1;
  std::vector<std::string> methods = {"batch", "mpc", "ocmpc", "proportional"};
  std::string output_dir = ".";
  int initial_state = 0;

  void validate() const;
};

/// Flat `key = value` configuration text: namespaced keys
/// (system.M = 16, mmpp.lambda = 20,25,30), '#' comments, matrix rows
/// separated by ';'. Unknown keys are errors.
ExperimentSpec parse_config_text(const std::string& text);
ExperimentSpec parse_config_file(const std::string& path);

/// Canonical text form of a spec (valid config-file syntax).
std::string format_config(const ExperimentSpec& spec);

struct RunDiagSummary {
  double max_primal_residual = 0.0;
  double min_slack_seen = 0.0;
  long factorizations = 0;
  long repairs = 0;
  long cold_restarts = 0;
  double solve_seconds = 0.0;  ///< batch: one-shot solve time
};

/// One (method, run) trajectory.
struct RunResult {
  std::string method;
  int run = 0;
  std::vector<double> cum_cost;  ///< length T, non-decreasing
  std::vector<double> step_ms;   ///< per-round wall-clock time
  std::uint64_t trace_hash = 0;
  bool failed = false;
  std::string error;
  RunDiagSummary diag;
};

/// Executes every requested method on a shared per-run traffic trace.
/// Deterministic for a fixed (spec, master_seed); runs execute in
/// parallel over independent RNG streams and merge in run order.
std::vector<RunResult> run_experiment(const ExperimentSpec& spec,
                                      int threads = 0);

/// Mean and central 95% band (2.5th/97.5th percentiles) per method and
/// step, plus final-cost gaps against the batch mean when present.
struct MethodSummary {
  std::string method;
  std::vector<double> mean, p95_lo, p95_hi;
  int successes = 0;
  int failures = 0;
  double mean_final_cost = 0.0;
  double mean_step_ms = 0.0;
};
struct Aggregate {
  std::vector<MethodSummary> methods;
  std::map<std::string, double> final_gap_vs_batch;
};
Aggregate aggregate(const std::vector<RunResult>& results);

/// Grid calibration of the two parameters the scenario leaves open.
/// Sweeps total capacity as a fraction of the mean offered load (with
/// ds = 1/C_bar) and picks the point whose proportional-controller loss
/// fraction lands closest to the middle of the target range, running
/// short pilot simulations. Throws CalibrationError (listing the
/// explored frontier) when no grid point qualifies.
struct CalibrationPoint {
  double capacity_fraction = 0.0;
  double C_bar = 0.0;
  double loss_fraction = 0.0;
  bool in_range = false;
};
struct CalibrationResult {
  double ds = 0.0;
  double C_bar = 0.0;
  double loss_fraction = 0.0;
  std::vector<CalibrationPoint> grid;
};
CalibrationResult calibrate_capacity(const ExperimentSpec& spec,
                                     double target_lo = 0.05,
                                     double target_hi = 0.25);

/// Mean offered packets per step under the stationary chain law:
/// (pi . lambda) * sum_p 1/k_p.
double mean_offered_load(const MmppConfig& mmpp);

// Output files. results.csv: method,run,t,cum_cost,step_ms;
// summary.csv: method,t,mean,p95_lo,p95_hi; gaps.csv:
// method,final_gap_vs_batch; manifest.txt: resolved spec + versions.
void write_results_csv(const std::vector<RunResult>& results,
                       const std::string& path);
void write_summary_csv(const Aggregate& agg, const std::string& path);
void write_gaps_csv(const Aggregate& agg, const std::string& path);
void write_manifest(const ExperimentSpec& spec,
                    const std::vector<RunResult>& results,
                    const std::string& path);

}  // namespace ocmpc

#endif  // OCMPC_EXPERIMENTS_HPP_
