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
#include <vector>

#include "loospec/errors.hpp"
#include "loospec/matrix.hpp"
#include "loospec/rng.hpp"

namespace loospec {

struct KMeansOptions {
  std::size_t restarts = 20;
  std::size_t max_iterations = 300;
  double convergence_tol = 1e-10;  // relative objective change
  enum class Init { PlusPlus, Given } init = Init::PlusPlus;
  Matrix given_centers;  // d x k, used when init == Given
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<int> labels;  // 0-based, length n
  Matrix centers;           // d x k
  double objective = 0.0;
  std::vector<double> objective_history;  // per-iteration, best restart
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

inline Matrix plus_plus_init(const Matrix& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.cols(), d = pts.rows();
  Matrix centers(d, k);
  std::vector<double> d2(n, 0.0);
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy(pts.col(first).begin(), pts.col(first).end(), centers.col(0).begin());
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(pts.col(i), centers.col(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(n));
    } else {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    std::copy(pts.col(pick).begin(), pts.col(pick).end(), centers.col(c).begin());
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], sq_dist(pts.col(i), centers.col(c)));
  }
  return centers;
}

struct LloydRun {
  std::vector<int> labels;
  Matrix centers;
  double objective;
  std::vector<double> history;
};

inline LloydRun lloyd(const Matrix& pts, std::size_t k, Matrix centers,
                      const KMeansOptions& opts) {
  const std::size_t n = pts.cols(), d = pts.rows();
  std::vector<int> labels(n, 0);
  std::vector<std::size_t> counts(k, 0);
  LloydRun run;
  double prev = -1.0;

  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    // assignment, ties to the lowest center index
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      double best = sq_dist(pts.col(i), centers.col(0));
      std::size_t arg = 0;
      for (std::size_t c = 1; c < k; ++c) {
        const double dd = sq_dist(pts.col(i), centers.col(c));
        if (dd < best) {
          best = dd;
          arg = c;
        }
      }
      labels[i] = static_cast<int>(arg);
      counts[arg]++;
    }
    // empty clusters restart from the costliest point
    std::vector<bool> stolen(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double worst = -1.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (stolen[i]) continue;
        const std::size_t owner = static_cast<std::size_t>(labels[i]);
        if (counts[owner] <= 1) continue;  // do not empty another cluster
        const double dd = sq_dist(pts.col(i), centers.col(owner));
        if (dd > worst) {
          worst = dd;
          arg = i;
        }
      }
      if (worst < 0.0) break;  // fewer distinct points than clusters
      counts[static_cast<std::size_t>(labels[arg])]--;
      labels[arg] = static_cast<int>(c);
      counts[c] = 1;
      stolen[arg] = true;
    }
    // means
    centers = Matrix(d, k);
    for (std::size_t i = 0; i < n; ++i)
      axpy(1.0, pts.col(i), centers.col(static_cast<std::size_t>(labels[i])));
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (auto& v : centers.col(c)) v *= inv;
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      obj += sq_dist(pts.col(i), centers.col(static_cast<std::size_t>(labels[i])));
    run.history.push_back(obj);
    if (prev >= 0.0 && std::fabs(prev - obj) <= opts.convergence_tol * std::max(prev, 1e-300))
      break;
    prev = obj;
  }
  run.labels = std::move(labels);
  run.centers = std::move(centers);
  run.objective = run.history.empty() ? 0.0 : run.history.back();
  return run;
}

}  // namespace detail

/// Lloyd iterations from k-means++ starts, best of `restarts`. Points are the
/// columns of `pts`.
inline KMeansResult kmeans(const Matrix& pts, std::size_t k, const KMeansOptions& opts = {}) {
  if (pts.empty()) throw InvalidInput("kmeans: empty input");
  if (k < 1 || k > pts.cols()) throw InvalidInput("kmeans: need 1 <= k <= n");
  if (opts.restarts < 1) throw InvalidInput("kmeans: restarts must be positive");
  if (opts.init == KMeansOptions::Init::Given &&
      (opts.given_centers.rows() != pts.rows() || opts.given_centers.cols() != k))
    throw InvalidInput("kmeans: given centers must be d x k");

  const std::size_t restarts =
      opts.init == KMeansOptions::Init::Given ? 1 : opts.restarts;
  KMeansResult best;
  bool have = false;
  for (std::size_t t = 0; t < restarts; ++t) {
    Matrix init;
    if (opts.init == KMeansOptions::Init::Given) {
      init = opts.given_centers;
    } else {
      Rng rng(substream_key(opts.seed, 5, t));
      init = detail::plus_plus_init(pts, k, rng);
    }
    detail::LloydRun run = detail::lloyd(pts, k, std::move(init), opts);
    if (!have || run.objective < best.objective) {
      best.labels = std::move(run.labels);
      best.centers = std::move(run.centers);
      best.objective = run.objective;
      best.objective_history = std::move(run.history);
      have = true;
    }
  }
  return best;
}

/// Global k-means optimum by exhaustive enumeration of partitions (canonical
/// first-occurrence labelings, branch-and-bound on the partial cost).
/// Enforced cap: k^n <= 1e7.
inline KMeansResult exact_kmeans_oracle(const Matrix& pts, std::size_t k) {
  if (pts.empty()) throw InvalidInput("exact_kmeans_oracle: empty input");
  const std::size_t n = pts.cols(), d = pts.rows();
  if (k < 1 || k > n) throw InvalidInput("exact_kmeans_oracle: need 1 <= k <= n");
  if (static_cast<double>(n) * std::log(static_cast<double>(k)) > std::log(1e7))
    throw InvalidInput("exact_kmeans_oracle: k^n exceeds the 1e7 cap");

  std::vector<double> point_sq(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) point_sq[i] = dot(pts.col(i), pts.col(i));

  std::vector<int> labels(n, 0), best_labels(n, 0);
  std::vector<std::size_t> counts(k, 0);
  Matrix sums(d, k);
  std::vector<double> sumsq(k, 0.0);
  double best = std::numeric_limits<double>::infinity();

  // cost so far: sum_c (sumsq_c - ||sum_c||^2 / count_c); within-cluster SSE
  // only grows as points join, so it is a valid bound for pruning.
  auto cluster_sse = [&](std::size_t c) {
    if (counts[c] == 0) return 0.0;
    double s2 = 0.0;
    for (double v : sums.col(c)) s2 += v * v;
    return sumsq[c] - s2 / static_cast<double>(counts[c]);
  };

  double partial = 0.0;

  auto recurse = [&](auto&& self, std::size_t i, std::size_t used) -> void {
    if (i == n) {
      if (partial < best) {
        best = partial;
        best_labels = labels;
      }
      return;
    }
    const std::size_t limit = std::min(k, used + 1);
    for (std::size_t c = 0; c < limit; ++c) {
      const double before = cluster_sse(c);
      counts[c]++;
      axpy(1.0, pts.col(i), sums.col(c));
      sumsq[c] += point_sq[i];
      const double after = cluster_sse(c);
      const double delta = after - before;
      partial += delta;
      if (partial < best) {
        labels[i] = static_cast<int>(c);
        self(self, i + 1, std::max(used, c + 1));
      }
      partial -= delta;
      counts[c]--;
      axpy(-1.0, pts.col(i), sums.col(c));
      sumsq[c] -= point_sq[i];
    }
  };
  recurse(recurse, 0, 0);

  KMeansResult out;
  out.labels = best_labels;
  out.centers = Matrix(d, k);
  std::fill(counts.begin(), counts.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(best_labels[i]);
    counts[c]++;
    axpy(1.0, pts.col(i), out.centers.col(c));
  }
  double obj = 0.0;
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (auto& v : out.centers.col(c)) v /= static_cast<double>(counts[c]);
  for (std::size_t i = 0; i < n; ++i)
    obj += detail::sq_dist(pts.col(i), out.centers.col(static_cast<std::size_t>(best_labels[i])));
  out.objective = obj;
  out.objective_history = {obj};
  return out;
}

}  // namespace loospec
