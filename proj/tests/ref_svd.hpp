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

// Test-only reference SVD: one-sided Jacobi. Deliberately coded with no
// shared machinery with loospec::thin_svd so the two routes are independent.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "loospec/matrix.hpp"

namespace refsvd {

struct Result {
  loospec::Matrix left;
  std::vector<double> values;
  loospec::Matrix right;
};

// One-sided Jacobi on the columns of a (m >= k assumed after orientation).
inline Result jacobi_svd(const loospec::Matrix& input) {
  using loospec::Matrix;
  const bool transposed = input.rows() < input.cols();
  Matrix a = transposed ? input.transposed() : input;
  const std::size_t m = a.rows(), k = a.cols();
  Matrix v = Matrix::identity(k);

  const double eps = 1e-15;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          app += a(r, p) * a(r, p);
          aqq += a(r, q) * a(r, q);
          apq += a(r, p) * a(r, q);
        }
        if (std::fabs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double theta = 0.5 * std::atan2(2.0 * apq, app - aqq);
        const double c = std::cos(theta), s = std::sin(theta);
        for (std::size_t r = 0; r < m; ++r) {
          const double x = a(r, p), y = a(r, q);
          a(r, p) = c * x + s * y;
          a(r, q) = -s * x + c * y;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double x = v(r, p), y = v(r, q);
          v(r, p) = c * x + s * y;
          v(r, q) = -s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < m; ++r) s += a(r, j) * a(r, j);
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(k);
  for (std::size_t j = 0; j < k; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Result out;
  out.values.resize(k);
  Matrix u(m, k), vv(k, k);
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t j = order[t];
    out.values[t] = sigma[j];
    const double inv = sigma[j] > 0.0 ? 1.0 / sigma[j] : 0.0;
    for (std::size_t r = 0; r < m; ++r) u(r, t) = a(r, j) * inv;
    for (std::size_t r = 0; r < k; ++r) vv(r, t) = v(r, j);
  }
  if (transposed) {
    out.left = std::move(vv);
    out.right = std::move(u);
  } else {
    out.left = std::move(u);
    out.right = std::move(vv);
  }
  return out;
}

}  // namespace refsvd
