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

#include "ocmpc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace ocmpc {

namespace {

#ifndef OCMPC_VERSION
#define OCMPC_VERSION "0.0.0"
#endif

using Clock = std::chrono::steady_clock;

// Calibration pilots draw from stream indices far above any run index.
constexpr std::uint64_t kCalibrationStreamBase = 1ull << 48;

const std::vector<std::string> kKnownMethods = {"batch", "mpc", "ocmpc",
                                                "proportional"};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
  }
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for " + key + ": '" + v + "'");
  }
}

Eigen::VectorXd parse_list(const std::string& key, const std::string& v) {
  const auto items = split(v, ',');
  Eigen::VectorXd out(static_cast<long>(items.size()));
  for (size_t i = 0; i < items.size(); ++i)
    out[i] = parse_double(key, items[i]);
  return out;
}

Eigen::MatrixXd parse_matrix(const std::string& key, const std::string& v) {
  const auto rows = split(v, ';');
  std::vector<Eigen::VectorXd> parsed;
  for (const auto& row : rows) parsed.push_back(parse_list(key, row));
  const long R = static_cast<long>(parsed.size());
  if (R == 0) throw ConfigError("empty matrix for " + key);
  Eigen::MatrixXd out(R, parsed[0].size());
  for (long i = 0; i < R; ++i) {
    if (parsed[i].size() != out.cols())
      throw ConfigError("ragged matrix rows for " + key);
    out.row(i) = parsed[i].transpose();
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void ExperimentSpec::validate() const {
  system.validate();
  MmppConfig m = mmpp;
  if (m.k.size() == 0) m.k = system.k;
  m.validate();
  if (m.k.size() != system.P)
    throw ConfigError("mmpp normalization costs must have P entries");
  if (runs < 1) throw ConfigError("experiment.runs must be >= 1");
  if (methods.empty()) throw ConfigError("experiment.methods must not be empty");
  for (const auto& name : methods)
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), name) ==
        kKnownMethods.end())
      throw ConfigError("unknown method '" + name + "'");
  if (initial_state < 0 || initial_state >= m.S)
    throw ConfigError("mmpp.initial_state out of range");
}

ExperimentSpec parse_config_text(const std::string& text) {
  ExperimentSpec spec;
  spec.mmpp.S = 0;  // force explicit mmpp block
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "system.M") spec.system.M = static_cast<int>(parse_int(key, value));
    else if (key == "system.P") spec.system.P = static_cast<int>(parse_int(key, value));
    else if (key == "system.W") spec.system.W = static_cast<int>(parse_int(key, value));
    else if (key == "system.T") spec.system.T = static_cast<int>(parse_int(key, value));
    else if (key == "system.k") spec.system.k = parse_list(key, value);
    else if (key == "system.Q_bar") spec.system.Q_bar = parse_double(key, value);
    else if (key == "system.Q0") spec.system.Q0 = parse_double(key, value);
    else if (key == "system.dw_bar") spec.system.dw_bar = parse_double(key, value);
    else if (key == "system.ds") spec.system.ds = parse_double(key, value);
    else if (key == "system.C_bar") spec.system.C_bar = parse_double(key, value);
    else if (key == "system.eta") spec.system.eta = parse_double(key, value);
    else if (key == "mmpp.S") spec.mmpp.S = static_cast<int>(parse_int(key, value));
    else if (key == "mmpp.P") spec.mmpp.Pmat = parse_matrix(key, value);
    else if (key == "mmpp.lambda") spec.mmpp.lambda = parse_list(key, value);
    else if (key == "mmpp.initial_state")
      spec.initial_state = static_cast<int>(parse_int(key, value)) - 1;
    else if (key == "experiment.runs") spec.runs = static_cast<int>(parse_int(key, value));
    else if (key == "experiment.seed")
      spec.master_seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "experiment.methods") {
      spec.methods.clear();
      for (const auto& mth : split(value, ',')) spec.methods.push_back(mth);
    } else if (key == "experiment.output_dir") spec.output_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  if (spec.mmpp.S == 0)
    throw ConfigError("config must define the mmpp block (mmpp.S, ...)");
  spec.mmpp.k = spec.system.k;
  return spec;
}

ExperimentSpec parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string format_config(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "system.M = " << spec.system.M << "\n";
  out << "system.P = " << spec.system.P << "\n";
  out << "system.W = " << spec.system.W << "\n";
  out << "system.T = " << spec.system.T << "\n";
  out << "system.k = ";
  for (int p = 0; p < spec.system.k.size(); ++p)
    out << (p ? "," : "") << fmt(spec.system.k[p]);
  out << "\n";
  out << "system.Q_bar = " << fmt(spec.system.Q_bar) << "\n";
  out << "system.Q0 = " << fmt(spec.system.Q0) << "\n";
  out << "system.dw_bar = " << fmt(spec.system.dw_bar) << "\n";
  out << "system.ds = " << fmt(spec.system.ds) << "\n";
  out << "system.C_bar = " << fmt(spec.system.C_bar) << "\n";
  out << "system.eta = " << fmt(spec.system.eta) << "\n";
  out << "mmpp.S = " << spec.mmpp.S << "\n";
  out << "mmpp.P = ";
  for (int i = 0; i < spec.mmpp.S; ++i) {
    if (i) out << "; ";
    for (int j = 0; j < spec.mmpp.S; ++j)
      out << (j ? "," : "") << fmt(spec.mmpp.Pmat(i, j));
  }
  out << "\n";
  out << "mmpp.lambda = ";
  for (int i = 0; i < spec.mmpp.lambda.size(); ++i)
    out << (i ? "," : "") << fmt(spec.mmpp.lambda[i]);
  out << "\n";
  out << "mmpp.initial_state = " << (spec.initial_state + 1) << "\n";
  out << "experiment.runs = " << spec.runs << "\n";
  out << "experiment.seed = " << spec.master_seed << "\n";
  out << "experiment.methods = ";
  for (size_t i = 0; i < spec.methods.size(); ++i)
    out << (i ? "," : "") << spec.methods[i];
  out << "\n";
  out << "experiment.output_dir = " << spec.output_dir << "\n";
  return out.str();
}

double mean_offered_load(const MmppConfig& mmpp) {
  const Eigen::VectorXd pi = stationary_distribution(mmpp.Pmat);
  const double rate = pi.dot(mmpp.lambda);
  return rate * mmpp.k.cwiseInverse().sum();
}

namespace {

RunResult execute_method(const ExperimentSpec& spec, const std::string& method,
                         const TrafficTrace& trace, std::uint64_t hash,
                         int run) {
  const SystemConfig& sys = spec.system;
  RunResult out;
  out.method = method;
  out.run = run;
  out.trace_hash = hash;
  out.diag.min_slack_seen = std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd init_w = cost_proportional_weights(sys);
  Plant plant(sys, init_w);

  auto push_step = [&](const RoundDiagnostics& diag) {
    out.cum_cost.push_back(plant.cumulative_loss_cost());
    out.step_ms.push_back(diag.seconds * 1e3);
    out.diag.max_primal_residual =
        std::max(out.diag.max_primal_residual, diag.primal_residual);
    out.diag.min_slack_seen = std::min(out.diag.min_slack_seen, diag.min_slack);
    out.diag.factorizations += diag.factorizations;
    out.diag.repairs += diag.repaired ? 1 : 0;
    out.diag.cold_restarts += diag.cold_restart ? 1 : 0;
  };

  if (method == "ocmpc") {
    OcmpcController controller(
        sys, forecast(trace.states[0], sys.W, spec.mmpp),
        Eigen::MatrixXd::Constant(sys.P, sys.M, sys.Q0), init_w);
    for (int t = 0; t < sys.T; ++t) {
      const Eigen::MatrixXd fc = forecast(trace.states[t], sys.W + 1, spec.mmpp);
      const RoundOutput round =
          controller.round(fc, trace.arrivals.row(t).transpose(), plant);
      push_step(round.diag);
    }
  } else if (method == "mpc") {
    MpcController controller(sys,
                             Eigen::MatrixXd::Constant(sys.P, sys.M, sys.Q0),
                             init_w);
    for (int t = 0; t < sys.T; ++t) {
      const Eigen::MatrixXd fc = forecast(trace.states[t], sys.W, spec.mmpp);
      const RoundOutput round =
          controller.round(fc, trace.arrivals.row(t).transpose(), plant);
      push_step(round.diag);
    }
  } else if (method == "proportional") {
    ProportionalController controller(sys);
    for (int t = 0; t < sys.T; ++t) {
      const RoundOutput round =
          controller.round(trace.arrivals.row(t).transpose(), plant);
      push_step(round.diag);
    }
  } else if (method == "batch") {
    const BatchResult batch = batch_hindsight(sys, trace, init_w);
    out.diag.solve_seconds = batch.solve_seconds;
    for (int t = 0; t < sys.T; ++t) {
      const auto t0 = Clock::now();
      ControllerDecision dec = batch.decisions[t];
      dec.f_in =
          feedback_correction(dec.f_in, trace.arrivals.row(t).transpose());
      plant.apply(dec, trace.arrivals.row(t).transpose());
      RoundDiagnostics diag;
      diag.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      diag.min_slack = std::numeric_limits<double>::infinity();
      push_step(diag);
    }
  } else {
    throw ConfigError("unknown method '" + method + "'");
  }
  return out;
}

}  // namespace

std::vector<RunResult> run_experiment(const ExperimentSpec& spec,
                                      int threads) {
  spec.validate();
  ExperimentSpec resolved = spec;
  resolved.mmpp.k = spec.system.k;

  // Preserve order, drop duplicates.
  std::vector<std::string> methods;
  for (const auto& m : resolved.methods)
    if (std::find(methods.begin(), methods.end(), m) == methods.end())
      methods.push_back(m);

  const int n_methods = static_cast<int>(methods.size());
  std::vector<RunResult> results(
      static_cast<size_t>(resolved.runs) * n_methods);

  std::atomic<int> next_run{0};
  auto worker = [&]() {
    for (;;) {
      const int run = next_run.fetch_add(1);
      if (run >= resolved.runs) return;
      RngStream stream(resolved.master_seed, static_cast<std::uint64_t>(run));
      const TrafficTrace trace = generate_trace(
          resolved.mmpp, resolved.system.T, resolved.initial_state, stream);
      const std::uint64_t hash = trace_hash(trace);
      for (int j = 0; j < n_methods; ++j) {
        RunResult& slot = results[static_cast<size_t>(run) * n_methods + j];
        try {
          slot = execute_method(resolved, methods[j], trace, hash, run);
        } catch (const std::exception& e) {
          slot.method = methods[j];
          slot.run = run;
          slot.trace_hash = hash;
          slot.failed = true;
          slot.error = e.what();
        }
      }
    }
  };

  int n_threads = threads > 0
                      ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, resolved.runs));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

Aggregate aggregate(const std::vector<RunResult>& results) {
  if (results.empty()) throw DimensionError("aggregate needs at least one run");

  // Paired-trace fairness: every method inside a run saw the same trace.
  std::map<int, std::uint64_t> run_hash;
  for (const auto& r : results) {
    auto [it, inserted] = run_hash.emplace(r.run, r.trace_hash);
    if (!inserted && it->second != r.trace_hash)
      throw Error("methods of run " + std::to_string(r.run) +
                  " consumed different traces");
  }

  std::vector<std::string> order;
  for (const auto& r : results)
    if (std::find(order.begin(), order.end(), r.method) == order.end())
      order.push_back(r.method);

  auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = q * (static_cast<double>(v.size()) - 1.0);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return (1.0 - frac) * v[lo] + frac * v[hi];
  };

  Aggregate agg;
  for (const auto& name : order) {
    MethodSummary summary;
    summary.method = name;
    size_t T = 0;
    for (const auto& r : results)
      if (r.method == name) {
        if (r.failed) {
          ++summary.failures;
        } else {
          ++summary.successes;
          T = r.cum_cost.size();
        }
      }
    if (summary.successes == 0)
      throw Error("method '" + name + "' has no successful run");
    summary.mean.resize(T);
    summary.p95_lo.resize(T);
    summary.p95_hi.resize(T);
    double ms_total = 0.0;
    long ms_count = 0;
    for (size_t t = 0; t < T; ++t) {
      std::vector<double> vals;
      for (const auto& r : results)
        if (r.method == name && !r.failed) vals.push_back(r.cum_cost[t]);
      summary.mean[t] =
          std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
      summary.p95_lo[t] = quantile(vals, 0.025);
      summary.p95_hi[t] = quantile(vals, 0.975);
    }
    for (const auto& r : results)
      if (r.method == name && !r.failed)
        for (double ms : r.step_ms) {
          ms_total += ms;
          ++ms_count;
        }
    summary.mean_step_ms = ms_count ? ms_total / ms_count : 0.0;
    summary.mean_final_cost = T ? summary.mean.back() : 0.0;
    agg.methods.push_back(std::move(summary));
  }

  const auto batch_it =
      std::find_if(agg.methods.begin(), agg.methods.end(),
                   [](const MethodSummary& s) { return s.method == "batch"; });
  if (batch_it != agg.methods.end()) {
    const double base = batch_it->mean_final_cost;
    for (const auto& s : agg.methods) {
      double gap;
      if (base > 0.0)
        gap = (s.mean_final_cost - base) / base;
      else
        gap = s.mean_final_cost == 0.0
                  ? 0.0
                  : std::numeric_limits<double>::infinity();
      agg.final_gap_vs_batch[s.method] = gap;
    }
  }
  return agg;
}

CalibrationResult calibrate_capacity(const ExperimentSpec& spec,
                                     double target_lo, double target_hi) {
  if (!(0.0 <= target_lo && target_lo < target_hi && target_hi <= 1.0))
    throw ConfigError("calibration target range must satisfy 0 <= lo < hi <= 1");
  ExperimentSpec pilot = spec;
  pilot.mmpp.k = spec.system.k;
  pilot.mmpp.validate();

  const double load = mean_offered_load(pilot.mmpp);
  const int T_cal = std::min(spec.system.T, 60);
  const int pilots = 3;
  const double mid = 0.5 * (target_lo + target_hi);

  CalibrationResult result;
  const CalibrationPoint* best = nullptr;
  for (double f = 0.10; f <= 3.0001; f += 0.05) {
    CalibrationPoint point;
    point.capacity_fraction = f;
    point.C_bar = f * load / spec.system.M;
    SystemConfig sys = spec.system;
    sys.C_bar = point.C_bar;
    sys.ds = 1.0 / point.C_bar;
    sys.validate();

    double lost = 0.0, offered = 0.0;
    for (int i = 0; i < pilots; ++i) {
      RngStream stream(spec.master_seed, kCalibrationStreamBase + i);
      const TrafficTrace trace =
          generate_trace(pilot.mmpp, T_cal, spec.initial_state, stream);
      Plant plant(sys, cost_proportional_weights(sys));
      ProportionalController controller(sys);
      for (int t = 0; t < T_cal; ++t) {
        const RoundOutput round =
            controller.round(trace.arrivals.row(t).transpose(), plant);
        lost += round.observed.loss.sum();
      }
      offered += trace.arrivals.sum();
    }
    point.loss_fraction = offered > 0.0 ? lost / offered : 0.0;
    point.in_range =
        point.loss_fraction >= target_lo && point.loss_fraction <= target_hi;
    result.grid.push_back(point);
  }

  for (const auto& point : result.grid) {
    if (!point.in_range) continue;
    if (best == nullptr || std::abs(point.loss_fraction - mid) <
                               std::abs(best->loss_fraction - mid))
      best = &point;
  }
  if (best == nullptr) {
    std::ostringstream msg;
    msg << "no capacity grid point reaches a proportional loss fraction in ["
        << target_lo << ", " << target_hi << "]; frontier:";
    for (const auto& point : result.grid)
      msg << " (xload=" << point.capacity_fraction
          << ", frac=" << point.loss_fraction << ")";
    throw CalibrationError(msg.str());
  }
  result.C_bar = best->C_bar;
  result.ds = 1.0 / best->C_bar;
  result.loss_fraction = best->loss_fraction;
  return result;
}

void write_results_csv(const std::vector<RunResult>& results,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "method,run,t,cum_cost,step_ms\n";
  for (const auto& r : results) {
    if (r.failed) continue;
    for (size_t t = 0; t < r.cum_cost.size(); ++t) {
      char ms[32];
      std::snprintf(ms, sizeof(ms), "%.3f", r.step_ms[t]);
      out << r.method << "," << r.run << "," << t << "," << fmt(r.cum_cost[t])
          << "," << ms << "\n";
    }
  }
}

void write_summary_csv(const Aggregate& agg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "method,t,mean,p95_lo,p95_hi\n";
  for (const auto& s : agg.methods)
    for (size_t t = 0; t < s.mean.size(); ++t)
      out << s.method << "," << t << "," << fmt(s.mean[t]) << ","
          << fmt(s.p95_lo[t]) << "," << fmt(s.p95_hi[t]) << "\n";
}

void write_gaps_csv(const Aggregate& agg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "method,final_gap_vs_batch\n";
  for (const auto& [method, gap] : agg.final_gap_vs_batch)
    out << method << "," << fmt(gap) << "\n";
}

void write_manifest(const ExperimentSpec& spec,
                    const std::vector<RunResult>& results,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "# ocmpc experiment manifest\n";
  out << "version = " << OCMPC_VERSION << "\n";
  out << "\n# resolved configuration\n" << format_config(spec);
  out << "\n# per-run outcomes\n";
  out << "# method,run,status,final_cost,trace_hash,factorizations,repairs,"
         "cold_restarts,solve_seconds\n";
  for (const auto& r : results) {
    out << r.method << "," << r.run << ","
        << (r.failed ? "failed" : "ok") << ",";
    if (r.failed)
      out << "-,-,-,-,-,-  # " << r.error << "\n";
    else
      out << fmt(r.cum_cost.empty() ? 0.0 : r.cum_cost.back()) << ","
          << r.trace_hash << "," << r.diag.factorizations << ","
          << r.diag.repairs << "," << r.diag.cold_restarts << ","
          << fmt(r.diag.solve_seconds) << "\n";
  }
}

}  // namespace ocmpc
