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

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ocmpc/experiments.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitCalibration = 3;

int run_simulate(const std::string& config_path, int runs, long seed,
                 const std::string& methods, const std::string& out_dir,
                 int threads) {
  ocmpc::ExperimentSpec spec = ocmpc::parse_config_file(config_path);
  if (runs > 0) spec.runs = runs;
  if (seed >= 0) spec.master_seed = static_cast<std::uint64_t>(seed);
  if (!methods.empty()) {
    spec.methods.clear();
    std::stringstream ss(methods);
    std::string item;
    while (std::getline(ss, item, ',')) spec.methods.push_back(item);
  }
  if (!out_dir.empty()) spec.output_dir = out_dir;
  spec.validate();
  fs::create_directories(spec.output_dir);

  const auto results = ocmpc::run_experiment(spec, threads);
  const auto agg = ocmpc::aggregate(results);

  const fs::path dir(spec.output_dir);
  ocmpc::write_results_csv(results, (dir / "results.csv").string());
  ocmpc::write_summary_csv(agg, (dir / "summary.csv").string());
  ocmpc::write_gaps_csv(agg, (dir / "gaps.csv").string());
  ocmpc::write_manifest(spec, results, (dir / "manifest.txt").string());

  for (const auto& s : agg.methods) {
    std::printf("%-13s mean final cost %12.4f   mean step %8.3f ms",
                s.method.c_str(), s.mean_final_cost, s.mean_step_ms);
    const auto gap = agg.final_gap_vs_batch.find(s.method);
    if (gap != agg.final_gap_vs_batch.end() && s.method != "batch")
      std::printf("   gap vs batch %+7.2f%%", 100.0 * gap->second);
    if (s.failures > 0) std::printf("   (%d failed runs)", s.failures);
    std::printf("\n");
  }
  std::printf("wrote results.csv, summary.csv, gaps.csv, manifest.txt to %s\n",
              spec.output_dir.c_str());
  return kExitOk;
}

int run_calibrate(const std::string& config_path, const std::string& out_dir,
                  double lo, double hi) {
  ocmpc::ExperimentSpec spec = ocmpc::parse_config_file(config_path);
  fs::create_directories(out_dir);
  const auto result = ocmpc::calibrate_capacity(spec, lo, hi);

  const fs::path dir(out_dir);
  {
    std::ofstream grid((dir / "calibration.csv"));
    grid << "capacity_fraction,C_bar,loss_fraction,in_range\n";
    for (const auto& p : result.grid)
      grid << p.capacity_fraction << "," << p.C_bar << "," << p.loss_fraction
           << "," << (p.in_range ? 1 : 0) << "\n";
  }
  ocmpc::ExperimentSpec calibrated = spec;
  calibrated.system.ds = result.ds;
  calibrated.system.C_bar = result.C_bar;
  {
    std::ofstream cfg((dir / "calibrated.cfg"));
    cfg << ocmpc::format_config(calibrated);
  }
  std::printf(
      "calibrated: C_bar = %.6f packets/step, ds = %.6f "
      "(proportional loss fraction %.4f)\n",
      result.C_bar, result.ds, result.loss_fraction);
  std::printf("wrote calibration.csv and calibrated.cfg to %s\n",
              out_dir.c_str());
  return kExitOk;
}

int run_trace(const std::string& config_path, long seed,
              const std::string& out_file) {
  ocmpc::ExperimentSpec spec = ocmpc::parse_config_file(config_path);
  if (seed >= 0) spec.master_seed = static_cast<std::uint64_t>(seed);
  spec.validate();
  ocmpc::RngStream stream(spec.master_seed, 0);  // run-0 stream
  ocmpc::MmppConfig mmpp = spec.mmpp;
  mmpp.k = spec.system.k;
  const auto trace = ocmpc::generate_trace(mmpp, spec.system.T,
                                           spec.initial_state, stream);
  if (!out_file.empty() && fs::path(out_file).has_parent_path())
    fs::create_directories(fs::path(out_file).parent_path());
  ocmpc::write_trace_csv(trace, out_file);
  std::printf("wrote %d-step trace to %s\n", spec.system.T, out_file.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online-optimized packet routing and scheduling simulator"};
  app.require_subcommand(1);

  std::string config_path, methods, out_dir = "out", out_file = "trace.csv";
  int runs = -1, threads = 0;
  long seed = -1;
  double target_lo = 0.05, target_hi = 0.25;

  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo campaign");
  simulate->add_option("--config", config_path, "config file")->required();
  simulate->add_option("--runs", runs, "Monte Carlo run count");
  simulate->add_option("--seed", seed, "master seed");
  simulate->add_option("--methods", methods,
                       "comma list from batch,mpc,ocmpc,proportional");
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--threads", threads, "worker threads (0 = auto)");

  auto* calibrate =
      app.add_subcommand("calibrate", "grid-search the open capacity knobs");
  calibrate->add_option("--config", config_path, "config file")->required();
  calibrate->add_option("--out", out_dir, "output directory");
  calibrate->add_option("--target-lo", target_lo,
                        "lower proportional loss fraction bound");
  calibrate->add_option("--target-hi", target_hi,
                        "upper proportional loss fraction bound");

  auto* trace = app.add_subcommand("trace", "export one traffic trace CSV");
  trace->add_option("--config", config_path, "config file")->required();
  trace->add_option("--seed", seed, "master seed");
  trace->add_option("--out", out_file, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed())
      return run_simulate(config_path, runs, seed, methods, out_dir, threads);
    if (calibrate->parsed())
      return run_calibrate(config_path, out_dir, target_lo, target_hi);
    if (trace->parsed()) return run_trace(config_path, seed, out_file);
  } catch (const ocmpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ocmpc::DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ocmpc::CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return kExitCalibration;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
