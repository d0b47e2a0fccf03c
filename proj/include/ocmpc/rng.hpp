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

#ifndef OCMPC_RNG_HPP_
#define OCMPC_RNG_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace ocmpc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seedable, splittable random stream. Streams derived from the same
/// master seed with distinct indices are statistically independent;
/// a (master, index) pair always yields the same sequence. All
/// distributions are implemented here rather than with <random>
/// distribution adaptors so sequences are identical across standard
/// library versions.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    std::uint64_t s = master_seed ^ (0xD1B54A32D192ED03ull * (stream_index + 1));
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    engine_.seed(a ^ (b << 1));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return (engine_() >> 11) * 0x1.0p-53; }

  /// Poisson count by Knuth's product method, chunked so that the
  /// running product never underflows for large means.
  long poisson(double mean) {
    long count = 0;
    while (mean > 500.0) {
      count += poisson_small(500.0);
      mean -= 500.0;
    }
    return count + poisson_small(mean);
  }

  /// Samples an index from an (unnormalized is not allowed) probability
  /// row by inverse CDF.
  int categorical(const Eigen::VectorXd& probs) {
    const double u = uniform01();
    double acc = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return static_cast<int>(probs.size()) - 1;  // guards rounding in acc
  }

  /// Standard normal via Box-Muller (used by tests for random directions).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  long poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = uniform01();
    while (prod > limit) {
      ++k;
      prod *= uniform01();
    }
    return k;
  }

  std::mt19937_64 engine_;
};

}  // namespace ocmpc

#endif  // OCMPC_RNG_HPP_
