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
#include <cstddef>
#include <vector>

#include "loospec/errors.hpp"
#include "loospec/matrix.hpp"
#include "loospec/svd.hpp"

namespace loospec {

/// Column-orthonormal basis of an r-dimensional subspace of R^p.
struct SubspaceBasis {
  Matrix basis;  // p x r

  std::size_t ambient_dim() const { return basis.rows(); }
  std::size_t rank() const { return basis.cols(); }
};

/// Leading r left singular vectors as a basis.
inline SubspaceBasis leading_left_basis(const SvdResult& svd, std::size_t r) {
  if (r < 1 || r > svd.size()) throw InvalidInput("leading_left_basis: rank out of range");
  Matrix b(svd.left.rows(), r);
  for (std::size_t j = 0; j < r; ++j) {
    auto src = svd.left.col(j);
    auto dst = b.col(j);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  }
  return SubspaceBasis{std::move(b)};
}

/// ||A A^T - B B^T||_F, the projector (Frobenius) distance between two
/// equal-rank subspaces; equals sqrt(2) * ||sin Theta||_F. Ranges over
/// [0, sqrt(2 r)].
inline double projector_distance(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.ambient_dim() != b.ambient_dim() || a.rank() != b.rank())
    throw InvalidInput("projector_distance: dimension mismatch");
  const std::size_t p = a.ambient_dim(), r = a.rank();
  double s = 0.0;
  std::vector<double> pa_col(p), pb_col(p);
  for (std::size_t c = 0; c < p; ++c) {
    std::fill(pa_col.begin(), pa_col.end(), 0.0);
    std::fill(pb_col.begin(), pb_col.end(), 0.0);
    for (std::size_t j = 0; j < r; ++j) {
      axpy(a.basis(c, j), a.basis.col(j), pa_col);
      axpy(b.basis(c, j), b.basis.col(j), pb_col);
    }
    for (std::size_t i = 0; i < p; ++i) {
      const double diff = pa_col[i] - pb_col[i];
      s += diff * diff;
    }
  }
  const double cap = std::sqrt(2.0 * static_cast<double>(r));
  return std::min(std::sqrt(std::max(s, 0.0)), cap);
}

/// Same distance through the identity ||AA^T - BB^T||_F^2 = 2(r - ||A^T B||_F^2).
/// The two routes must agree to 1e-8; tests hold them to that.
inline double projector_distance_spectral(const SubspaceBasis& a, const SubspaceBasis& b) {
  if (a.ambient_dim() != b.ambient_dim() || a.rank() != b.rank())
    throw InvalidInput("projector_distance_spectral: dimension mismatch");
  const Matrix cross = matmul_at_b(a.basis, b.basis);
  double f2 = 0.0;
  for (std::size_t j = 0; j < cross.cols(); ++j)
    for (std::size_t i = 0; i < cross.rows(); ++i) f2 += cross(i, j) * cross(i, j);
  const double r = static_cast<double>(a.rank());
  const double cap = std::sqrt(2.0 * r);
  return std::min(std::sqrt(std::max(2.0 * (r - f2), 0.0)), cap);
}

struct ProjectionSplit {
  std::vector<double> in_span;
  std::vector<double> residual;
};

/// y = in_span + residual with in_span = U U^T y and U^T residual = 0.
inline ProjectionSplit project_split(const SubspaceBasis& u, std::span<const double> y) {
  if (u.ambient_dim() != y.size()) throw InvalidInput("project_split: dimension mismatch");
  ProjectionSplit out;
  const std::vector<double> coeffs = matvec_transposed(u.basis, y);
  out.in_span = matvec(u.basis, coeffs);
  out.residual.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out.residual[i] = y[i] - out.in_span[i];
  return out;
}

}  // namespace loospec
