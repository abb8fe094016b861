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
#include <cstddef>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

#include "loospec/errors.hpp"
#include "loospec/matrix.hpp"
#include "loospec/rng.hpp"

namespace loospec {

/// Thin SVD of a p x n matrix: M = left * diag(values) * right^T with
/// column-orthonormal factors and nonincreasing nonnegative values.
struct SvdResult {
  Matrix left;                 // p x d
  std::vector<double> values;  // length d, descending
  Matrix right;                // n x d

  std::size_t size() const { return values.size(); }
  /// sigma_{i+1} with the convention sigma_{d+1} = 0.
  double value_or_zero(std::size_t i) const { return i < values.size() ? values[i] : 0.0; }
};

namespace detail {

// Householder reflector H = I - beta v v^T with v[0] = 1 implicit, chosen so
// H x = |x| e1. Returns (beta, alpha); the tail of v overwrites x[1..].
inline std::pair<double, double> make_householder(double* x, std::size_t len) {
  double sigma = 0.0;
  for (std::size_t i = 1; i < len; ++i) sigma += x[i] * x[i];
  if (sigma == 0.0) return {0.0, x[0] < 0.0 ? -x[0] : x[0]};
  const double mu = std::sqrt(x[0] * x[0] + sigma);
  const double v0 = (x[0] <= 0.0) ? x[0] - mu : -sigma / (x[0] + mu);
  const double beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
  for (std::size_t i = 1; i < len; ++i) x[i] /= v0;
  return {beta, mu};
}

// Hmm: with x[0] < 0 and sigma == 0 the reflector above is skipped, so the
// diagonal entry can be negative; sign fixes happen after the QR stage.

inline void rot_cols(Matrix& m, std::size_t i, std::size_t j, double c, double s) {
  const std::size_t n = m.rows();
  double* a = m.data() + i * n;
  double* b = m.data() + j * n;
  for (std::size_t r = 0; r < n; ++r) {
    const double x = a[r], y = b[r];
    a[r] = c * x + s * y;
    b[r] = -s * x + c * y;
  }
}

// (c, s, r) with c*f + s*g = r and -s*f + c*g = 0.
inline std::tuple<double, double, double> givens(double f, double g) {
  if (g == 0.0) return {1.0, 0.0, f};
  if (f == 0.0) return {0.0, 1.0, g};
  const double r = std::hypot(f, g);
  return {f / r, g / r, r};
}

struct Bidiag {
  std::vector<double> d;  // diagonal, length k
  std::vector<double> e;  // superdiagonal, length k-1
  Matrix u;               // m x k
  Matrix v;               // k x k
};

// Golub-Kahan bidiagonalization of a tall matrix (m >= k), with explicit
// accumulation of the orthogonal factors.
inline Bidiag bidiagonalize(Matrix a) {
  const std::size_t m = a.rows(), k = a.cols();
  Bidiag out;
  out.d.assign(k, 0.0);
  out.e.assign(k > 0 ? k - 1 : 0, 0.0);
  std::vector<double> beta_left(k, 0.0), beta_right(k, 0.0);
  std::vector<double> w(std::max(m, k), 0.0);

  for (std::size_t j = 0; j < k; ++j) {
    // Left reflector on column j, rows j..m-1.
    {
      double* x = a.data() + j * m + j;
      auto [beta, alpha] = make_householder(x, m - j);
      beta_left[j] = beta;
      out.d[j] = alpha;
      if (beta != 0.0) {
        for (std::size_t c = j + 1; c < k; ++c) {
          double* col = a.data() + c * m;
          double t = col[j];
          for (std::size_t r = j + 1; r < m; ++r) t += x[r - j] * col[r];
          t *= beta;
          col[j] -= t;
          for (std::size_t r = j + 1; r < m; ++r) col[r] -= t * x[r - j];
        }
      }
    }
    if (j + 2 < k) {
      // Right reflector on row j, columns j+1..k-1.
      const std::size_t len = k - 1 - j;
      std::vector<double> x(len);
      for (std::size_t t = 0; t < len; ++t) x[t] = a(j, j + 1 + t);
      auto [beta, alpha] = make_householder(x.data(), len);
      beta_right[j] = beta;
      out.e[j] = alpha;
      for (std::size_t t = 0; t < len; ++t) a(j, j + 1 + t) = x[t];
      if (beta != 0.0) {
        std::fill(w.begin(), w.begin() + (m - j - 1), 0.0);
        for (std::size_t t = 0; t < len; ++t) {
          const double vc = (t == 0) ? 1.0 : x[t];
          const double* col = a.data() + (j + 1 + t) * m;
          for (std::size_t r = j + 1; r < m; ++r) w[r - j - 1] += vc * col[r];
        }
        for (std::size_t t = 0; t < len; ++t) {
          const double vc = beta * ((t == 0) ? 1.0 : x[t]);
          double* col = a.data() + (j + 1 + t) * m;
          for (std::size_t r = j + 1; r < m; ++r) col[r] -= vc * w[r - j - 1];
        }
      }
    } else if (j + 2 == k) {
      out.e[j] = a(j, j + 1);
    }
  }

  // Accumulate U (m x k) by applying left reflectors backwards.
  out.u = Matrix(m, k);
  for (std::size_t i = 0; i < k; ++i) out.u(i, i) = 1.0;
  for (std::size_t j = k; j-- > 0;) {
    const double beta = beta_left[j];
    if (beta == 0.0) continue;
    const double* v = a.data() + j * m + j;  // v[0] implicit 1
    for (std::size_t c = j; c < k; ++c) {
      double* col = out.u.data() + c * m;
      double t = col[j];
      for (std::size_t r = j + 1; r < m; ++r) t += v[r - j] * col[r];
      t *= beta;
      col[j] -= t;
      for (std::size_t r = j + 1; r < m; ++r) col[r] -= t * v[r - j];
    }
  }

  // Accumulate V (k x k) from the right reflectors.
  out.v = Matrix::identity(k);
  if (k >= 3) {
    for (std::size_t j = k - 2; j-- > 0;) {
      const double beta = beta_right[j];
      if (beta == 0.0) continue;
      const std::size_t len = k - 1 - j;
      for (std::size_t c = j + 1; c < k; ++c) {
        double* col = out.v.data() + c * k;
        double t = col[j + 1];
        for (std::size_t s = 1; s < len; ++s) t += a(j, j + 1 + s) * col[j + 1 + s];
        t *= beta;
        col[j + 1] -= t;
        for (std::size_t s = 1; s < len; ++s) col[j + 1 + s] -= t * a(j, j + 1 + s);
      }
    }
  }
  return out;
}

// Implicit-shift QR on the bidiagonal (Golub-Kahan-Reinsch), rotations
// accumulated into u and v. Iteration cap: 100 * k sweeps.
inline void qr_iterate(Bidiag& b) {
  const std::size_t k = b.d.size();
  if (k < 2) return;
  auto& d = b.d;
  auto& e = b.e;
  const double tol = 100.0 * std::numeric_limits<double>::epsilon();
  const std::size_t cap = 100 * k;
  std::size_t sweeps = 0;

  while (true) {
    bool active = false;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      if (e[i] == 0.0) continue;
      if (std::fabs(e[i]) <= tol * (std::fabs(d[i]) + std::fabs(d[i + 1])))
        e[i] = 0.0;
      else
        active = true;
    }
    if (!active) break;

    std::size_t hi = k - 1;
    while (hi > 0 && e[hi - 1] == 0.0) --hi;
    std::size_t lo = hi;
    while (lo > 0 && e[lo - 1] != 0.0) --lo;

    double scale = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) scale = std::max(scale, std::fabs(d[i]));
    for (std::size_t i = lo; i < hi; ++i) scale = std::max(scale, std::fabs(e[i]));

    // Negligible diagonal entry: split the block by chasing the coupling out.
    std::size_t zi = hi + 1;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (std::fabs(d[i]) <= tol * scale) {
        zi = i;
        break;
      }
    }
    if (zi <= hi) {
      d[zi] = 0.0;
      if (zi < hi) {
        double f = e[zi];
        e[zi] = 0.0;
        for (std::size_t m = zi + 1; m <= hi && f != 0.0; ++m) {
          const double r = std::hypot(d[m], f);
          const double c = d[m] / r, s = f / r;
          d[m] = r;
          if (m < hi) {
            const double em = e[m];
            f = -s * em;
            e[m] = c * em;
          } else {
            f = 0.0;
          }
          rot_cols(b.u, zi, m, c, -s);
        }
      } else {
        double f = e[hi - 1];
        e[hi - 1] = 0.0;
        for (std::size_t m = hi; m-- > lo && f != 0.0;) {
          const double r = std::hypot(d[m], f);
          const double c = d[m] / r, s = -f / r;
          d[m] = r;
          if (m > lo) {
            const double em = e[m - 1];
            f = s * em;
            e[m - 1] = c * em;
          }
          rot_cols(b.v, m, hi, c, -s);
        }
      }
      continue;
    }

    if (++sweeps > cap)
      throw NumericalFailure("SVD QR iteration did not converge within 100*min(p,n) sweeps");

    // Wilkinson shift from the trailing 2x2 of B^T B.
    const double t11 = d[hi - 1] * d[hi - 1] + (hi - 1 > lo ? e[hi - 2] * e[hi - 2] : 0.0);
    const double t12 = d[hi - 1] * e[hi - 1];
    const double t22 = d[hi] * d[hi] + e[hi - 1] * e[hi - 1];
    double mu;
    if (t12 == 0.0) {
      mu = t22;
    } else {
      const double delta = (t11 - t22) / 2.0;
      const double sgn = (delta >= 0.0) ? 1.0 : -1.0;
      mu = t22 - t12 * t12 / (delta + sgn * std::hypot(delta, t12));
    }

    double f = d[lo] * d[lo] - mu;
    double g = d[lo] * e[lo];
    for (std::size_t j = lo; j < hi; ++j) {
      auto [c, s, r] = givens(f, g);
      if (j > lo) e[j - 1] = r;
      f = c * d[j] + s * e[j];
      e[j] = -s * d[j] + c * e[j];
      g = s * d[j + 1];
      d[j + 1] = c * d[j + 1];
      rot_cols(b.v, j, j + 1, c, s);

      std::tie(c, s, r) = givens(f, g);
      d[j] = r;
      const double te = e[j];
      const double td = d[j + 1];
      f = c * te + s * td;
      d[j + 1] = -s * te + c * td;
      if (j + 1 < hi) {
        g = s * e[j + 1];
        e[j + 1] = c * e[j + 1];
      }
      rot_cols(b.u, j, j + 1, c, s);
    }
    e[hi - 1] = f;
  }
}

// Descending order; values equal within 1e-12 keep their pre-sort order.
inline std::vector<std::size_t> sorted_order(const std::vector<double>& vals) {
  const std::size_t k = vals.size();
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  std::size_t start = 0;
  while (start < k) {
    std::size_t end = start + 1;
    while (end < k && vals[order[end - 1]] - vals[order[end]] <= 1e-12) ++end;
    if (end - start > 1) std::sort(order.begin() + start, order.begin() + end);
    start = end;
  }
  return order;
}

inline SvdResult svd_tall(const Matrix& a) {
  const std::size_t m = a.rows(), k = a.cols();
  Bidiag b = bidiagonalize(a);
  qr_iterate(b);

  // Negative values fold into the left factor.
  for (std::size_t i = 0; i < k; ++i) {
    if (b.d[i] < 0.0) {
      b.d[i] = -b.d[i];
      auto col = b.u.col(i);
      for (auto& x : col) x = -x;
    }
  }

  const auto order = sorted_order(b.d);
  SvdResult out;
  out.values.resize(k);
  out.left = Matrix(m, k);
  out.right = Matrix(k, k);
  for (std::size_t t = 0; t < k; ++t) {
    const std::size_t s = order[t];
    out.values[t] = b.d[s];
    auto lu = out.left.col(t);
    auto su = b.u.col(s);
    for (std::size_t r = 0; r < m; ++r) lu[r] = su[r];
    auto lv = out.right.col(t);
    auto sv = b.v.col(s);
    for (std::size_t r = 0; r < k; ++r) lv[r] = sv[r];
  }
  return out;
}

// Largest-magnitude entry of the left vector made positive (ties: lowest
// index); the right vector flips with it so the product is unchanged.
inline void canonicalize_signs(SvdResult& svd) {
  for (std::size_t j = 0; j < svd.size(); ++j) {
    auto u = svd.left.col(j);
    std::size_t imax = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double a = std::fabs(u[i]);
      if (a > best) {
        best = a;
        imax = i;
      }
    }
    if (u[imax] < 0.0) {
      for (auto& x : u) x = -x;
      for (auto& x : svd.right.col(j)) x = -x;
    }
  }
}

}  // namespace detail

/// Thin SVD. With `rank` given, the result is truncated to the leading
/// `rank` triplets; otherwise d = min(p, n).
inline SvdResult thin_svd(const Matrix& m, std::optional<std::size_t> rank = std::nullopt) {
  if (m.empty()) throw InvalidInput("thin_svd: empty matrix");
  if (!m.all_finite()) throw InvalidInput("thin_svd: non-finite entries");
  const std::size_t d = std::min(m.rows(), m.cols());
  if (rank && (*rank < 1 || *rank > d))
    throw InvalidInput("thin_svd: requested rank out of range");

  SvdResult out;
  if (m.rows() >= m.cols()) {
    out = detail::svd_tall(m);
  } else {
    SvdResult t = detail::svd_tall(m.transposed());
    out.left = std::move(t.right);
    out.right = std::move(t.left);
    out.values = std::move(t.values);
  }
  detail::canonicalize_signs(out);

  if (rank && *rank < d) {
    SvdResult cut;
    cut.values.assign(out.values.begin(), out.values.begin() + *rank);
    cut.left = Matrix(out.left.rows(), *rank);
    cut.right = Matrix(out.right.rows(), *rank);
    for (std::size_t j = 0; j < *rank; ++j) {
      auto src = out.left.col(j);
      std::copy(src.begin(), src.end(), cut.left.col(j).begin());
      auto srv = out.right.col(j);
      std::copy(srv.begin(), srv.end(), cut.right.col(j).begin());
    }
    return cut;
  }
  return out;
}

/// Count of singular values above the relative cutoff 1e-9 * max(sigma_1, 1).
inline std::size_t numeric_rank(const std::vector<double>& values) {
  if (values.empty()) return 0;
  const double cut = 1e-9 * std::max(values.front(), 1.0);
  std::size_t r = 0;
  for (double v : values)
    if (v > cut) ++r;
  return r;
}

/// Spectral norm via power iteration on the smaller Gram matrix, falling back
/// to the full SVD if the iteration stalls.
inline double operator_norm(const Matrix& m) {
  if (m.empty()) throw InvalidInput("operator_norm: empty matrix");
  if (!m.all_finite()) throw InvalidInput("operator_norm: non-finite entries");

  const bool by_rows = m.rows() <= m.cols();
  const std::size_t dim = by_rows ? m.rows() : m.cols();
  Matrix g(dim, dim);
  if (by_rows) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      auto col = m.col(c);
      for (std::size_t i = 0; i < dim; ++i) {
        const double mi = col[i];
        if (mi == 0.0) continue;
        for (std::size_t j = 0; j < dim; ++j) g(j, i) += mi * col[j];
      }
    }
  } else {
    g = matmul_at_b(m, m);
  }

  double gmax = 0.0;
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) gmax = std::max(gmax, std::fabs(g(i, j)));
  if (gmax == 0.0) return 0.0;

  auto run = [&](std::vector<double> v) -> std::optional<double> {
    double nv = norm2(v);
    for (auto& x : v) x /= nv;
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
      std::vector<double> w = matvec(g, v);
      const double nw = norm2(w);
      if (nw == 0.0) return 0.0;
      for (auto& x : w) x /= nw;
      v = std::move(w);
      if (it > 0 && std::fabs(nw - lambda) <= 4e-16 * nw) return nw;
      lambda = nw;
    }
    return std::nullopt;
  };

  std::vector<double> ones(dim, 1.0);
  std::vector<double> rnd(dim);
  Rng rng(substream_key(0x5EEDBA5EULL, 17, dim));
  for (auto& x : rnd) x = rng.normal();

  auto a = run(ones);
  auto b = run(rnd);
  if (a && b && std::fabs(*a - *b) <= 1e-11 * std::max({*a, *b, 1.0}))
    return std::sqrt(std::max(*a, *b));
  return thin_svd(m).values.front();
}

}  // namespace loospec
