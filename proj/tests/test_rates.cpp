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

// Seeded Monte Carlo rate checks. Slower than the other suites (about a
// minute); expected values are frozen from the same seeded runs.

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "loospec/cluster.hpp"
#include "loospec/mixture.hpp"

using namespace loospec;

TEST_CASE("two-cluster Laplace rate: rank-one vs oracle LRT") {
  // p=400, n=500, Delta=4, sigma_bar=1. The rank-one error tracks the
  // normal-approximation tail Phi(-Delta/2) (Gaussian-limit behavior of
  // u_1^T eps); the plain exponential exp(-Delta^2/8) is its large-Delta
  // envelope, matched here within a factor 4 (the prefactor costs ~3.5x at
  // this size). The oracle LRT beats it with a log-error ratio near 2,
  // the Fisher-information gain of the Laplace family.
  const double separation = 4.0;
  const double b = 1.0 / std::sqrt(2.0);  // sigma_bar = 1
  const std::size_t p = 400, n = 500;
  const double delta = separation / (2.0 * std::sqrt(static_cast<double>(p)));

  double z_sum = 0.0, lrt_sum = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    auto inst = two_cluster_instance(delta, p, n, NoiseSpec::laplace(b),
                                     substream_key(31337, 1, static_cast<std::uint64_t>(t)));
    auto z = rank_one_cluster(inst.x);
    attach_loss(z.clustering, inst.z_star, 2);
    z_sum += *z.clustering.loss;
    lrt_sum +=
        misclustering_loss(lrt_cluster(inst.x, delta, inst.spec.noise), inst.z_star, 2).loss;
  }
  const double z_mean = z_sum / trials;
  const double lrt_mean = lrt_sum / trials;
  const double envelope = std::exp(-separation * separation / 8.0);
  const double normal_tail = 0.022750131948179195;  // Phi(-2)

  INFO("z_mean=" << z_mean << " lrt_mean=" << lrt_mean);
  // frozen from this seeded run
  REQUIRE_THAT(z_mean, Catch::Matchers::WithinAbs(0.03864, 0.006));
  REQUIRE(z_mean >= envelope / 4.0);
  REQUIRE(z_mean <= envelope);
  REQUIRE(z_mean >= normal_tail / 3.0);
  REQUIRE(z_mean <= 3.0 * normal_tail);

  REQUIRE(lrt_mean < z_mean);
  const double log_ratio = std::log(lrt_mean) / std::log(z_mean);
  REQUIRE(log_ratio >= 1.3);
  REQUIRE(log_ratio <= 2.5);
}

TEST_CASE("isotropic GMM spectral clustering stays under the exponential envelope") {
  // p=50, n=1000, k=2, Delta/sigma=6, r = kappa = 1
  const double separation = 6.0;
  const std::size_t p = 50, n = 1000;
  const double delta = separation / (2.0 * std::sqrt(static_cast<double>(p)));
  double sum = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    auto inst = two_cluster_instance(delta, p, n, NoiseSpec::isotropic_gaussian(1.0),
                                     substream_key(60601, 1, static_cast<std::uint64_t>(t)));
    auto res = spectral_cluster(inst.x, 2, 1);
    attach_loss(res, inst.z_star, 2);
    sum += *res.loss;
  }
  const double mean = sum / trials;
  const double envelope = 2.0 * std::exp(-separation * separation / 8.0);
  INFO("mean=" << mean << " envelope=" << envelope);
  REQUIRE(mean <= envelope + 0.01);
  REQUIRE(mean > 0.0);  // not an exact-recovery regime
}
