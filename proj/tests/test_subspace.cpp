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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "loospec/subspace.hpp"
#include "test_helpers.hpp"

using loospec::Matrix;
using loospec::SubspaceBasis;
using loospec::projector_distance;
using loospec::projector_distance_spectral;

namespace {

SubspaceBasis basis_from_cols(std::size_t p, std::initializer_list<std::vector<double>> cols) {
  Matrix b(p, cols.size());
  std::size_t j = 0;
  for (const auto& c : cols) {
    for (std::size_t i = 0; i < p; ++i) b(i, j) = c[i];
    ++j;
  }
  return SubspaceBasis{std::move(b)};
}

SubspaceBasis random_basis(std::size_t p, std::size_t r, std::uint64_t seed) {
  return loospec::leading_left_basis(loospec::thin_svd(testutil::random_matrix(p, r + 2, seed)), r);
}

}  // namespace

TEST_CASE("projector distance basic cases") {
  SECTION("identical spans give zero") {
    auto a = random_basis(6, 2, 11);
    REQUIRE_THAT(projector_distance(a, a), Catch::Matchers::WithinAbs(0.0, 1e-12));
  }
  SECTION("orthogonal rank-1 spans in R^2 give sqrt(2)") {
    auto e1 = basis_from_cols(2, {{1.0, 0.0}});
    auto e2 = basis_from_cols(2, {{0.0, 1.0}});
    REQUIRE_THAT(projector_distance(e1, e2),
                 Catch::Matchers::WithinAbs(std::sqrt(2.0), 1e-12));
  }
  SECTION("rank-1 spans at 45 degrees give 1") {
    // Frozen from 2x2 projector arithmetic: ||P_a - P_b||_F = sqrt(2 sin^2 45) = 1.
    const double s = 1.0 / std::sqrt(2.0);
    auto e1 = basis_from_cols(2, {{1.0, 0.0}});
    auto diag = basis_from_cols(2, {{s, s}});
    REQUIRE_THAT(projector_distance(e1, diag), Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("dimension mismatch rejected") {
    auto a = random_basis(5, 2, 1);
    auto b = random_basis(5, 3, 2);
    auto c = random_basis(6, 2, 3);
    REQUIRE_THROWS_AS(projector_distance(a, b), loospec::InvalidInput);
    REQUIRE_THROWS_AS(projector_distance(a, c), loospec::InvalidInput);
  }
}

TEST_CASE("Frobenius route equals the spectral identity route") {
  int pairs = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::size_t p = 3 + seed % 10;
    const std::size_t r = 1 + seed % std::min<std::size_t>(3, p - 1);
    auto a = random_basis(p, r, 2 * seed);
    auto b = random_basis(p, r, 2 * seed + 1);
    const double f = projector_distance(a, b);
    const double s = projector_distance_spectral(a, b);
    REQUIRE_THAT(f, Catch::Matchers::WithinAbs(s, 1e-8));
    ++pairs;
  }
  REQUIRE(pairs == 1000);
}

TEST_CASE("projector distance symmetry, range, triangle inequality") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t p = 4 + seed % 6;
    const std::size_t r = 1 + seed % 3;
    auto a = random_basis(p, r, 31 * seed);
    auto b = random_basis(p, r, 31 * seed + 7);
    auto c = random_basis(p, r, 31 * seed + 13);
    const double ab = projector_distance(a, b);
    const double ba = projector_distance(b, a);
    const double ac = projector_distance(a, c);
    const double bc = projector_distance(b, c);
    REQUIRE_THAT(ab, Catch::Matchers::WithinAbs(ba, 1e-11));
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= std::sqrt(2.0 * static_cast<double>(r)) + 1e-12);
    REQUIRE(ac <= ab + bc + 1e-10);
  }
}

TEST_CASE("project_split") {
  SECTION("coordinate projection example") {
    auto e1 = basis_from_cols(2, {{1.0, 0.0}});
    std::vector<double> y{3.0, 4.0};
    auto sp = loospec::project_split(e1, y);
    REQUIRE_THAT(sp.in_span[0], Catch::Matchers::WithinAbs(3.0, 1e-14));
    REQUIRE_THAT(sp.in_span[1], Catch::Matchers::WithinAbs(0.0, 1e-14));
    REQUIRE_THAT(sp.residual[0], Catch::Matchers::WithinAbs(0.0, 1e-14));
    REQUIRE_THAT(sp.residual[1], Catch::Matchers::WithinAbs(4.0, 1e-14));
  }
  SECTION("vector already in span has zero residual") {
    auto u = random_basis(7, 2, 5);
    std::vector<double> coeff{1.3, -0.4};
    auto y = loospec::matvec(u.basis, coeff);
    auto sp = loospec::project_split(u, y);
    REQUIRE(loospec::norm2(sp.residual) <= 1e-12);
  }
  SECTION("orthogonal vector has zero in-span part") {
    auto e1 = basis_from_cols(3, {{1.0, 0.0, 0.0}});
    std::vector<double> y{0.0, 2.0, -1.0};
    auto sp = loospec::project_split(e1, y);
    REQUIRE(loospec::norm2(sp.in_span) <= 1e-14);
  }
  SECTION("decomposition identities on random input") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const std::size_t p = 5 + seed % 5;
      auto u = random_basis(p, 2, 400 + seed);
      loospec::Rng rng(seed);
      std::vector<double> y(p);
      for (auto& x : y) x = rng.normal();
      auto sp = loospec::project_split(u, y);
      for (std::size_t i = 0; i < p; ++i)
        REQUIRE_THAT(sp.in_span[i] + sp.residual[i], Catch::Matchers::WithinAbs(y[i], 1e-12));
      auto ut_res = loospec::matvec_transposed(u.basis, sp.residual);
      REQUIRE(loospec::norm2(ut_res) <= 1e-10);
    }
  }
  SECTION("dimension mismatch rejected") {
    auto u = random_basis(4, 2, 9);
    std::vector<double> y(5, 1.0);
    REQUIRE_THROWS_AS(loospec::project_split(u, y), loospec::InvalidInput);
  }
}
