// Copyright 2026 the loospec authors
//
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

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace loospec {

/// SplitMix64 finalizer. All randomness in the library is derived from this
/// one mixing function, so streams are reproducible under any evaluation or
/// thread order.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// Key for an independent substream, e.g. one per matrix column or per
/// Monte Carlo trial. (seed, tag, index) -> 64-bit key.
inline std::uint64_t substream_key(std::uint64_t seed, std::uint64_t tag,
                                   std::uint64_t index) {
  std::uint64_t h = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  h = mix64(h);
  h += 0xD1B54A32D192ED03ULL * (index + 1);
  return mix64(h);
}

/// Counter-based generator: value i of stream k is mix64(k + i*gamma), the
/// SplitMix64 sequence with a fixed gamma.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform in the open interval (0,1).
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on (-w, w).
  double uniform_pm(double w) { return (2.0 * uniform01() - 1.0) * w; }

  /// Standard normal via Box-Muller; pairs are cached so the draw count is
  /// deterministic.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double sigma) { return sigma * normal(); }

  /// Laplace with scale b (variance 2 b^2), by inverse CDF.
  double laplace(double b) {
    const double q = uniform01() - 0.5;
    return (q < 0 ? 1.0 : -1.0) * b * std::log(1.0 - 2.0 * std::fabs(q));
  }

  /// +a or -a with equal probability.
  double rademacher(double a) { return (next_u64() >> 63) ? a : -a; }

  /// Uniform integer in [0, n). Modulo bias is negligible for our n and the
  /// mapping is fixed, which is what determinism needs.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace loospec
