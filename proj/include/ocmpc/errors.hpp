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

#ifndef OCMPC_ERRORS_HPP_
#define OCMPC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ocmpc {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or malformed config file.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Shape mismatch between supplied data and the problem layout.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

/// A point violates strict interiority of the inequality system.
class NotInteriorError : public Error {
 public:
  NotInteriorError(const std::string& what, long row, double slack)
      : Error(what), row(row), slack(slack) {}
  long row;      ///< index of the violated inequality row
  double slack;  ///< offending slack value (<= 0)
};

/// Numerically singular linear system.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, long rank_defect,
                      double condition_indicator)
      : Error(what),
        rank_defect(rank_defect),
        condition_indicator(condition_indicator) {}
  long rank_defect;
  double condition_indicator;  ///< |smallest pivot| / |largest pivot|
};

/// Problem certified infeasible. `max_min_slack` is the best achievable
/// minimum inequality slack on the equality manifold (<= 0).
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double max_min_slack)
      : Error(what), max_min_slack(max_min_slack) {}
  double max_min_slack;
};

/// Iteration cap exceeded; carries the residuals reached.
class IterationLimitError : public Error {
 public:
  IterationLimitError(const std::string& what, double primal_residual,
                      double newton_decrement)
      : Error(what),
        primal_residual(primal_residual),
        newton_decrement(newton_decrement) {}
  double primal_residual;
  double newton_decrement;
};

/// The plant rejected a decision; the message names the violated entry.
class PlantRejectError : public Error {
 public:
  explicit PlantRejectError(const std::string& what) : Error(what) {}
};

/// Capacity calibration found no admissible grid point.
class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& what) : Error(what) {}
};

}  // namespace ocmpc

#endif  // OCMPC_ERRORS_HPP_
