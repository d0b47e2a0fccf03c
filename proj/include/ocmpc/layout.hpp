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

#ifndef OCMPC_LAYOUT_HPP_
#define OCMPC_LAYOUT_HPP_

#include <tuple>

#include "ocmpc/errors.hpp"

namespace ocmpc {

/// The six per-(priority, modem, step) variable families of the
/// stacked decision vector.
enum class Var : int {
  kFlowIn = 0,    // routed inflow (packets/step)
  kWeight = 1,    // scheduler weight, in [0,1]
  kLoss = 2,      // dropped packets
  kFlowOut = 3,   // transmitted packets
  kQueue = 4,     // queue occupancy (packets)
  kQueueDelta = 5 // queue change over the step
};
inline constexpr int kNumVarFamilies = 6;

/// Invertible index map over (family, p, m, tau).
///
/// Stacking order is family-major, then tau, then m, then p:
///   index = ((family * (H+1) + tau) * M + m) * P + p
/// where H is the number of look-ahead steps, so each family occupies a
/// contiguous block of (H+1)*M*P entries and tau slices are contiguous
/// inside it. p and m are 0-based here.
class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(int P, int M, int H) : P_(P), M_(M), H_(H) {
    if (P < 1 || M < 1 || H < 1)
      throw DimensionError("layout requires P, M, H >= 1");
  }

  int priorities() const { return P_; }
  int modems() const { return M_; }
  int horizon() const { return H_; }      ///< look-ahead steps
  int blocks() const { return H_ + 1; }   ///< time slots per family

  /// Total dimension N = 6 * P * M * (H+1).
  long size() const {
    return static_cast<long>(kNumVarFamilies) * P_ * M_ * (H_ + 1);
  }

  long index(Var family, int p, int m, int tau) const {
    check(p, m, tau);
    return ((static_cast<long>(family) * (H_ + 1) + tau) * M_ + m) * P_ + p;
  }

  /// Inverse of index(); returns (family, p, m, tau).
  std::tuple<Var, int, int, int> inverse(long i) const {
    if (i < 0 || i >= size()) throw DimensionError("layout index out of range");
    const int p = static_cast<int>(i % P_);
    i /= P_;
    const int m = static_cast<int>(i % M_);
    i /= M_;
    const int tau = static_cast<int>(i % (H_ + 1));
    i /= (H_ + 1);
    return {static_cast<Var>(i), p, m, tau};
  }

 private:
  void check(int p, int m, int tau) const {
    if (p < 0 || p >= P_ || m < 0 || m >= M_ || tau < 0 || tau > H_)
      throw DimensionError("layout coordinates out of range");
  }

  int P_ = 1;
  int M_ = 1;
  int H_ = 1;
};

}  // namespace ocmpc

#endif  // OCMPC_LAYOUT_HPP_
