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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loospec/errors.hpp"
#include "loospec/matrix.hpp"
#include "loospec/rng.hpp"
#include "loospec/svd.hpp"

namespace loospec {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class NoiseFamily { IsotropicGaussian, Gaussian, Laplace, Rademacher, Uniform };

inline std::string to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::IsotropicGaussian: return "isotropic_gaussian";
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::Laplace: return "laplace";
    case NoiseFamily::Rademacher: return "rademacher";
    case NoiseFamily::Uniform: return "uniform";
  }
  return "?";
}

inline NoiseFamily noise_family_from_string(const std::string& s) {
  if (s == "isotropic_gaussian") return NoiseFamily::IsotropicGaussian;
  if (s == "gaussian") return NoiseFamily::Gaussian;
  if (s == "laplace") return NoiseFamily::Laplace;
  if (s == "rademacher") return NoiseFamily::Rademacher;
  if (s == "uniform") return NoiseFamily::Uniform;
  throw InvalidInput("unknown noise family: " + s);
}

/// Noise model for a mixture instance. IsotropicGaussian draws the whole
/// column from N(0, sigma^2 I); the coordinate-iid families draw each entry
/// from F. `zero_noise` is the explicit noiseless switch; a zero-variance
/// parameter is rejected instead of silently degenerating.
struct NoiseSpec {
  NoiseFamily family = NoiseFamily::IsotropicGaussian;
  double param = 1.0;  // sigma for Gaussians, b for Laplace, a for Rademacher, w for Uniform
  bool zero_noise = false;

  static NoiseSpec isotropic_gaussian(double sigma) {
    return {NoiseFamily::IsotropicGaussian, sigma, false};
  }
  static NoiseSpec gaussian(double sigma) { return {NoiseFamily::Gaussian, sigma, false}; }
  static NoiseSpec laplace(double b) { return {NoiseFamily::Laplace, b, false}; }
  static NoiseSpec rademacher(double a) { return {NoiseFamily::Rademacher, a, false}; }
  static NoiseSpec uniform(double w) { return {NoiseFamily::Uniform, w, false}; }
  static NoiseSpec noiseless() { return {NoiseFamily::IsotropicGaussian, 0.0, true}; }

  void validate() const {
    if (zero_noise) return;
    if (!(param > 0.0) || !std::isfinite(param))
      throw InvalidInput("noise parameter must be positive and finite (use the "
                         "explicit zero-noise flag for a noiseless instance)");
  }

  /// Per-coordinate standard deviation sigma_bar.
  double sigma_bar() const {
    if (zero_noise) return 0.0;
    switch (family) {
      case NoiseFamily::IsotropicGaussian:
      case NoiseFamily::Gaussian: return param;
      case NoiseFamily::Laplace: return param * std::sqrt(2.0);
      case NoiseFamily::Rademacher: return param;
      case NoiseFamily::Uniform: return param / std::sqrt(3.0);
    }
    return 0.0;
  }

  /// Sub-Gaussian variance proxy sigma^2; NaN for Laplace, which is not
  /// sub-Gaussian (diagnostics report "proxy undefined").
  double variance_proxy() const {
    if (zero_noise) return 0.0;
    switch (family) {
      case NoiseFamily::IsotropicGaussian:
      case NoiseFamily::Gaussian: return param * param;
      case NoiseFamily::Laplace: return kNaN;
      case NoiseFamily::Rademacher: return param * param;
      case NoiseFamily::Uniform: return param * param / 3.0;
    }
    return kNaN;
  }

  /// Fisher information of the coordinate density where defined
  /// (Gaussian: 1/sigma^2, Laplace: 1/b^2), NaN otherwise.
  double fisher_information() const {
    if (zero_noise) return kNaN;
    switch (family) {
      case NoiseFamily::IsotropicGaussian:
      case NoiseFamily::Gaussian: return 1.0 / (param * param);
      case NoiseFamily::Laplace: return 1.0 / (param * param);
      default: return kNaN;
    }
  }

  bool has_density() const {
    return family == NoiseFamily::IsotropicGaussian || family == NoiseFamily::Gaussian ||
           family == NoiseFamily::Laplace;
  }

  double sample(Rng& rng) const {
    switch (family) {
      case NoiseFamily::IsotropicGaussian:
      case NoiseFamily::Gaussian: return rng.normal(param);
      case NoiseFamily::Laplace: return rng.laplace(param);
      case NoiseFamily::Rademacher: return rng.rademacher(param);
      case NoiseFamily::Uniform: return rng.uniform_pm(param);
    }
    return 0.0;
  }
};

struct MixtureSpec {
  std::size_t p = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  Matrix centers;                          // p x k
  std::optional<std::vector<int>> labels;  // explicit z*, 0-based; otherwise balanced-random
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const {
    if (p < 1 || n < 1 || k < 1) throw InvalidInput("mixture spec: p, n, k must be positive");
    if (k > n) throw InvalidInput("mixture spec: k > n");
    if (centers.rows() != p || centers.cols() != k)
      throw InvalidInput("mixture spec: centers must be p x k");
    if (!centers.all_finite()) throw InvalidInput("mixture spec: non-finite centers");
    noise.validate();
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a + 1; b < k; ++b) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
          const double t = centers(i, a) - centers(i, b);
          d2 += t * t;
        }
        if (d2 == 0.0) throw InvalidInput("mixture spec: centers must be pairwise distinct");
      }
    if (labels) {
      if (labels->size() != n) throw InvalidInput("mixture spec: labels length != n");
      std::vector<bool> seen(k, false);
      for (int z : *labels) {
        if (z < 0 || static_cast<std::size_t>(z) >= k)
          throw InvalidInput("mixture spec: label out of range");
        seen[static_cast<std::size_t>(z)] = true;
      }
      for (bool s : seen)
        if (!s) throw InvalidInput("mixture spec: every cluster must be non-empty");
    }
  }
};

struct MixtureInstance {
  Matrix x;              // p x n, exactly p + e
  Matrix p_signal;       // p x n
  Matrix e_noise;        // p x n
  std::vector<int> z_star;  // 0-based labels
  MixtureSpec spec;
};

/// Exact floor/ceil balanced label multiset, shuffled. The first (n mod k)
/// clusters get the extra element, so beta is pinned by construction.
inline std::vector<int> balanced_random_labels(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<int> z;
  z.reserve(n);
  const std::size_t q = n / k, rem = n % k;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t c = 0; c < q + (a < rem ? 1 : 0); ++c) z.push_back(static_cast<int>(a));
  Rng rng(substream_key(seed, 3, 0));
  rng.shuffle(z);
  return z;
}

/// Draw X = P + E per the spec. Deterministic in spec.seed; noise column i
/// uses its own substream so generation order (or parallelism) cannot change
/// the result.
inline MixtureInstance make_instance(const MixtureSpec& spec) {
  spec.validate();
  MixtureInstance inst;
  inst.spec = spec;
  inst.z_star = spec.labels ? *spec.labels : balanced_random_labels(spec.n, spec.k, spec.seed);
  if (!spec.labels) {
    // balanced assignment leaves no empty cluster because k <= n
  }
  inst.p_signal = Matrix(spec.p, spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto dst = inst.p_signal.col(i);
    auto c = spec.centers.col(static_cast<std::size_t>(inst.z_star[i]));
    std::copy(c.begin(), c.end(), dst.begin());
  }
  inst.e_noise = Matrix(spec.p, spec.n);
  if (!spec.noise.zero_noise) {
    for (std::size_t i = 0; i < spec.n; ++i) {
      Rng rng(substream_key(spec.seed, 4, i));
      auto col = inst.e_noise.col(i);
      for (std::size_t r = 0; r < spec.p; ++r) col[r] = spec.noise.sample(rng);
    }
  }
  inst.x = Matrix(spec.p, spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto xc = inst.x.col(i);
    auto pc = inst.p_signal.col(i);
    auto ec = inst.e_noise.col(i);
    for (std::size_t r = 0; r < spec.p; ++r) xc[r] = pc[r] + ec[r];
  }
  return inst;
}

/// Two-cluster symmetric model: centers +delta 1_p and -delta 1_p, entries of
/// the noise iid from F.
inline MixtureInstance two_cluster_instance(double delta, std::size_t p, std::size_t n,
                                            const NoiseSpec& noise, std::uint64_t seed,
                                            std::optional<std::vector<int>> labels = {}) {
  if (delta == 0.0 || !std::isfinite(delta))
    throw InvalidInput("two_cluster_instance: delta must be nonzero and finite");
  MixtureSpec spec;
  spec.p = p;
  spec.n = n;
  spec.k = 2;
  spec.centers = Matrix(p, 2);
  for (std::size_t i = 0; i < p; ++i) {
    spec.centers(i, 0) = delta;
    spec.centers(i, 1) = -delta;
  }
  spec.labels = std::move(labels);
  spec.noise = noise;
  spec.seed = seed;
  return make_instance(spec);
}

/// Everything the mixture theorems gate on, computed from ground truth
/// (a simulation-only diagnostic). Quantities that need a threshold T are
/// NaN unless one is supplied; noiseless instances report infinities.
struct DiagnosticQuantities {
  double delta = 0.0;       // min pairwise center distance
  double beta = 0.0;        // (k/n) * smallest cluster size
  std::size_t kappa = 0;    // rank of the signal matrix
  std::vector<double> lambda;  // singular values of P (length min(p,n), zero-padded)
  double e_opnorm = 0.0;
  double rho0 = kInf;       // lambda_kappa / ||E||
  double psi0 = kInf;       // Delta / (beta^-0.5 k n^-0.5 ||E||)
  double psi1 = kNaN;       // Delta / (beta^-0.5 k (1 + sqrt(p/n)) sigma)
  double rho1 = kNaN;       // lambda_kappa / ((sqrt n + sqrt p) sigma)
  double psi2 = kNaN;       // Delta / (beta^-0.5 k^2 (1 + sqrt(p/n)) sigma)
  double rho2 = kNaN;       // T / (sigma (sqrt n + sqrt p)), needs T
  double psi3 = kNaN;       // Delta / (beta^-0.5 (1 + sqrt(p/n)) sigma)
  double tilde_psi0 = kInf; // Delta / (beta^-0.5 k^2 n^-0.5 ||E||)
  double tilde_rho = kNaN;  // T / ||E||, needs T
  bool proxy_defined = true;
};

/// Singular values of P via the weighted-center matrix W = [sqrt(n_a) theta_a]:
/// P P^T = W W^T because each center column repeats n_a times, so the spectra
/// match and the p x k problem is cheap at any n.
inline std::vector<double> signal_singular_values(const MixtureInstance& inst) {
  const auto& spec = inst.spec;
  std::vector<std::size_t> counts(spec.k, 0);
  for (int z : inst.z_star) counts[static_cast<std::size_t>(z)]++;
  Matrix w(spec.p, spec.k);
  for (std::size_t a = 0; a < spec.k; ++a) {
    const double s = std::sqrt(static_cast<double>(counts[a]));
    auto dst = w.col(a);
    auto c = spec.centers.col(a);
    for (std::size_t i = 0; i < spec.p; ++i) dst[i] = s * c[i];
  }
  std::vector<double> lam = thin_svd(w).values;
  lam.resize(std::min(spec.p, spec.n), 0.0);
  return lam;
}

inline DiagnosticQuantities diagnostics(const MixtureInstance& inst,
                                        std::optional<double> threshold = std::nullopt) {
  const auto& spec = inst.spec;
  DiagnosticQuantities d;

  double min_d2 = kInf;
  for (std::size_t a = 0; a < spec.k; ++a)
    for (std::size_t b = a + 1; b < spec.k; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < spec.p; ++i) {
        const double t = spec.centers(i, a) - spec.centers(i, b);
        s += t * t;
      }
      min_d2 = std::min(min_d2, s);
    }
  d.delta = spec.k > 1 ? std::sqrt(min_d2) : kInf;

  std::vector<std::size_t> counts(spec.k, 0);
  for (int z : inst.z_star) counts[static_cast<std::size_t>(z)]++;
  const std::size_t min_count = *std::min_element(counts.begin(), counts.end());
  d.beta = static_cast<double>(spec.k) * static_cast<double>(min_count) /
           static_cast<double>(spec.n);

  d.lambda = signal_singular_values(inst);
  d.kappa = numeric_rank(d.lambda);
  if (d.kappa == 0) throw InvalidInput("diagnostics: signal matrix has rank zero");
  const double lambda_kappa = d.lambda[d.kappa - 1];

  d.e_opnorm = operator_norm(inst.e_noise);
  const double np = static_cast<double>(spec.n), pp = static_cast<double>(spec.p);
  const double kk = static_cast<double>(spec.k);

  if (d.e_opnorm > 0.0) {
    d.rho0 = lambda_kappa / d.e_opnorm;
    d.psi0 = d.delta * std::sqrt(d.beta * np) / (kk * d.e_opnorm);
    d.tilde_psi0 = d.delta * std::sqrt(d.beta * np) / (kk * kk * d.e_opnorm);
    if (threshold) d.tilde_rho = *threshold / d.e_opnorm;
  } else {
    d.rho0 = d.psi0 = d.tilde_psi0 = kInf;
    if (threshold) d.tilde_rho = kInf;
  }

  const double proxy2 = spec.noise.variance_proxy();
  d.proxy_defined = !std::isnan(proxy2);
  if (d.proxy_defined && proxy2 > 0.0) {
    const double sigma = std::sqrt(proxy2);
    const double shape = 1.0 + std::sqrt(pp / np);
    d.psi1 = d.delta * std::sqrt(d.beta) / (kk * shape * sigma);
    d.rho1 = lambda_kappa / ((std::sqrt(np) + std::sqrt(pp)) * sigma);
    d.psi2 = d.delta * std::sqrt(d.beta) / (kk * kk * shape * sigma);
    d.psi3 = d.delta * std::sqrt(d.beta) / (shape * sigma);
    if (threshold) d.rho2 = *threshold / (sigma * (std::sqrt(np) + std::sqrt(pp)));
  } else if (d.proxy_defined) {  // zero noise
    d.psi1 = d.rho1 = d.psi2 = d.psi3 = kInf;
    if (threshold) d.rho2 = kInf;
  }
  return d;
}

// --- instance persistence -------------------------------------------------

inline std::map<std::string, std::string> spec_to_kv(const MixtureSpec& spec) {
  std::map<std::string, std::string> kv;
  kv["p"] = std::to_string(spec.p);
  kv["n"] = std::to_string(spec.n);
  kv["k"] = std::to_string(spec.k);
  kv["noise.family"] = to_string(spec.noise.family);
  if (spec.noise.zero_noise) {
    kv["noise.sigma"] = "0";
  } else if (spec.noise.family == NoiseFamily::IsotropicGaussian ||
             spec.noise.family == NoiseFamily::Gaussian) {
    kv["noise.sigma"] = std::to_string(spec.noise.param);
  } else {
    kv["noise.scale"] = std::to_string(spec.noise.param);
  }
  kv["seed"] = std::to_string(spec.seed);
  kv["assignment"] = spec.labels ? "explicit" : "balanced";
  // For the symmetric two-cluster model record delta as well.
  if (spec.k == 2 && spec.p >= 1) {
    bool symmetric = true;
    for (std::size_t i = 0; i < spec.p && symmetric; ++i)
      symmetric = spec.centers(i, 0) == -spec.centers(i, 1) &&
                  spec.centers(i, 0) == spec.centers(0, 0);
    if (symmetric) kv["delta"] = std::to_string(spec.centers(0, 0));
  }
  return kv;
}

}  // namespace loospec
