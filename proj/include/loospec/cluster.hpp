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
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "loospec/assignment.hpp"
#include "loospec/errors.hpp"
#include "loospec/io.hpp"
#include "loospec/kmeans.hpp"
#include "loospec/matrix.hpp"
#include "loospec/mixture.hpp"
#include "loospec/subspace.hpp"
#include "loospec/svd.hpp"

namespace loospec {

struct ClusteringResult {
  std::vector<int> labels;  // 0-based
  Matrix centers_reduced;   // r x k
  Matrix centers_lifted;    // p x k
  double objective = 0.0;
  std::size_t r_used = 0;
  std::optional<std::vector<std::size_t>> matched_perm;  // phi: truth -> estimated
  std::optional<double> loss;
};

struct LossResult {
  double loss;
  std::vector<std::size_t> perm;  // phi[a] = estimated label matched to truth a
};

/// min over bijections phi of |{i : z_i != phi(z*_i)}| / n, solved exactly on
/// the k x k agreement matrix.
inline LossResult misclustering_loss(const std::vector<int>& z, const std::vector<int>& z_star,
                                     std::size_t k) {
  if (k < 1) throw InvalidInput("misclustering_loss: k must be positive");
  if (z.size() != z_star.size() || z.empty())
    throw InvalidInput("misclustering_loss: label vectors must have equal positive length");
  Matrix agree(k, k);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int a = z_star[i], b = z[i];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= k || static_cast<std::size_t>(b) >= k)
      throw InvalidInput("misclustering_loss: label out of range");
    agree(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) += 1.0;
  }
  Matrix cost(k, k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) cost(a, b) = -agree(a, b);
  LossResult out;
  out.perm = solve_assignment(cost);
  double matched = 0.0;
  for (std::size_t a = 0; a < k; ++a) matched += agree(a, out.perm[a]);
  // integer mismatch count over n, so equal-cost matchings give bit-equal losses
  out.loss = (static_cast<double>(z.size()) - matched) / static_cast<double>(z.size());
  return out;
}

inline void attach_loss(ClusteringResult& result, const std::vector<int>& z_star,
                        std::size_t k) {
  LossResult lr = misclustering_loss(result.labels, z_star, k);
  result.matched_perm = std::move(lr.perm);
  result.loss = lr.loss;
}

namespace detail {

inline ClusteringResult cluster_on_basis(const Matrix& x, std::size_t k,
                                         const SubspaceBasis& basis,
                                         const KMeansOptions& opts) {
  const Matrix reduced = matmul_at_b(basis.basis, x);  // r x n
  KMeansResult km = kmeans(reduced, k, opts);
  ClusteringResult out;
  out.labels = std::move(km.labels);
  out.centers_reduced = std::move(km.centers);
  out.centers_lifted = matmul(basis.basis, out.centers_reduced);
  out.objective = km.objective;
  out.r_used = basis.rank();
  return out;
}

}  // namespace detail

/// Project the columns of X onto the leading r left singular vectors, then
/// k-means. r defaults to k.
inline ClusteringResult spectral_cluster(const Matrix& x, std::size_t k,
                                         std::optional<std::size_t> r = std::nullopt,
                                         const KMeansOptions& opts = {}) {
  const std::size_t rank = r.value_or(k);
  if (rank < 1 || rank > std::min(x.rows(), x.cols()))
    throw InvalidInput("spectral_cluster: r out of range");
  const SvdResult svd = thin_svd(x, rank);
  return detail::cluster_on_basis(x, k, leading_left_basis(svd, rank), opts);
}

/// Threshold variant: r is the largest index a in [k] with
/// lambda_a - lambda_{a+1} >= T. An empty set is a NoGapFound error rather
/// than a silent fallback.
inline ClusteringResult adaptive_spectral_cluster(const Matrix& x, std::size_t k,
                                                  double threshold,
                                                  const KMeansOptions& opts = {}) {
  if (!(threshold > 0.0)) throw InvalidInput("adaptive_spectral_cluster: threshold must be > 0");
  if (k < 1 || k > std::min(x.rows(), x.cols()))
    throw InvalidInput("adaptive_spectral_cluster: k out of range");
  const SvdResult svd = thin_svd(x);
  std::size_t r_hat = 0;
  for (std::size_t a = k; a >= 1; --a) {
    const double gap = svd.values[a - 1] - svd.value_or_zero(a);
    if (gap >= threshold) {
      r_hat = a;
      break;
    }
  }
  if (r_hat == 0)
    throw NoGapFound("adaptive_spectral_cluster: no singular-value gap meets the threshold");
  return detail::cluster_on_basis(x, k, leading_left_basis(svd, r_hat), opts);
}

struct RankOneResult {
  ClusteringResult clustering;
  std::vector<int> sign_labels;  // sign of the leading right singular vector
  bool sign_degenerate = false;  // all entries on one side
};

namespace detail {

// Exact 1-d 2-means by sorting and scanning split points; this is the argmin
// the rank-one estimator is defined by.
inline std::pair<std::vector<int>, std::array<double, 2>> two_means_1d(
    const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> prefix(n + 1, 0.0), prefix2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + v[order[i]];
    prefix2[i + 1] = prefix2[i] + v[order[i]] * v[order[i]];
  }
  auto sse = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
    const double cnt = static_cast<double>(hi - lo);
    const double s = prefix[hi] - prefix[lo];
    return (prefix2[hi] - prefix2[lo]) - s * s / cnt;
  };
  std::size_t best_m = 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 1; m < n; ++m) {
    const double c = sse(0, m) + sse(m, n);
    if (c < best) {
      best = c;
      best_m = m;
    }
  }
  std::vector<int> labels(n, 1);
  for (std::size_t i = 0; i < best_m; ++i) labels[order[i]] = 0;
  const double m0 = prefix[best_m] / static_cast<double>(best_m);
  const double m1 = (prefix[n] - prefix[best_m]) / static_cast<double>(n - best_m);
  return {labels, {m0, m1}};
}

}  // namespace detail

/// Two clusters from the top singular pair only: exact 2-means on u_1^T X,
/// plus the sign labels of the leading right singular vector.
inline RankOneResult rank_one_cluster(const Matrix& x) {
  if (x.cols() < 2) throw InvalidInput("rank_one_cluster: need at least two columns");
  const SvdResult svd = thin_svd(x, 1);
  std::vector<double> projected(x.cols());
  for (std::size_t i = 0; i < x.cols(); ++i) projected[i] = dot(svd.left.col(0), x.col(i));

  auto [labels, means] = detail::two_means_1d(projected);
  RankOneResult out;
  out.clustering.labels = std::move(labels);
  out.clustering.centers_reduced = Matrix(1, 2);
  out.clustering.centers_reduced(0, 0) = means[0];
  out.clustering.centers_reduced(0, 1) = means[1];
  out.clustering.centers_lifted = Matrix(x.rows(), 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < x.rows(); ++r)
      out.clustering.centers_lifted(r, c) = svd.left(r, 0) * means[c];
  double obj = 0.0;
  for (std::size_t i = 0; i < x.cols(); ++i) {
    const double d = projected[i] - means[static_cast<std::size_t>(out.clustering.labels[i])];
    obj += d * d;
  }
  out.clustering.objective = obj;
  out.clustering.r_used = 1;

  out.sign_labels.resize(x.cols());
  bool any0 = false, any1 = false;
  for (std::size_t i = 0; i < x.cols(); ++i) {
    const int s = svd.right(i, 0) >= 0.0 ? 0 : 1;
    out.sign_labels[i] = s;
    (s == 0 ? any0 : any1) = true;
  }
  out.sign_degenerate = !(any0 && any1);
  return out;
}

/// Oracle likelihood-ratio labels for the symmetric two-cluster model with a
/// known delta: label 0 iff sum_j log f(x_j - delta) >= sum_j log f(x_j + delta).
/// Only densities we model (Gaussian, Laplace) are accepted.
inline std::vector<int> lrt_cluster(const Matrix& x, double delta, const NoiseSpec& noise) {
  if (!noise.has_density())
    throw InvalidInput("lrt_cluster: noise family has no density");
  std::vector<int> labels(x.cols(), 0);
  for (std::size_t i = 0; i < x.cols(); ++i) {
    auto col = x.col(i);
    double stat = 0.0;  // l1 - l2 up to a positive factor
    switch (noise.family) {
      case NoiseFamily::IsotropicGaussian:
      case NoiseFamily::Gaussian:
        for (double v : col) stat += v;
        stat *= delta;
        break;
      case NoiseFamily::Laplace:
        for (double v : col) stat += std::fabs(v + delta) - std::fabs(v - delta);
        break;
      default:
        throw InvalidInput("lrt_cluster: unsupported family");
    }
    labels[i] = stat >= 0.0 ? 0 : 1;
  }
  return labels;
}

/// Per-column record of the quantities the entrywise decomposition lemmas
/// bound. Simulation-only: needs the ground-truth noise.
struct EntrywiseRecord {
  std::size_t i = 0;
  bool misclustered = false;
  double loo_noise_norm = 0.0;   // ||U_loo U_loo^T eps_i||
  double full_noise_norm = 0.0;  // ||U U^T eps_i||
  double threshold_simple = 0.0; // (1 - 512/psi0) Delta
  double signed_stat = kNaN;     // two-cluster symmetric model only
};

inline bool is_two_cluster_symmetric(const MixtureSpec& spec) {
  if (spec.k != 2) return false;
  double scale = 0.0, diff = 0.0;
  for (std::size_t r = 0; r < spec.p; ++r) {
    scale = std::max({scale, std::fabs(spec.centers(r, 0)), std::fabs(spec.centers(r, 1))});
    diff = std::max(diff, std::fabs(spec.centers(r, 0) + spec.centers(r, 1)));
  }
  return diff <= 1e-12 * std::max(scale, 1.0);
}

inline std::vector<EntrywiseRecord> entrywise_diagnostics(const MixtureInstance& inst,
                                                          const ClusteringResult& result,
                                                          std::size_t r) {
  if (!result.matched_perm)
    throw InvalidInput("entrywise_diagnostics: result must carry the matched permutation");
  const std::size_t n = inst.spec.n;
  if (result.labels.size() != n)
    throw InvalidInput("entrywise_diagnostics: result does not match the instance");
  if (r < 1 || r > std::min(inst.spec.p, n - 1))
    throw InvalidInput("entrywise_diagnostics: rank out of range");

  const DiagnosticQuantities diag = diagnostics(inst);
  const double threshold = (1.0 - 512.0 / diag.psi0) * diag.delta;
  const SvdResult full = thin_svd(inst.x, r);

  const bool symmetric = is_two_cluster_symmetric(inst.spec);
  std::vector<double> u1;  // top left singular vector of the signal
  if (symmetric) {
    std::vector<std::size_t> counts(2, 0);
    for (int z : inst.z_star) counts[static_cast<std::size_t>(z)]++;
    Matrix w(inst.spec.p, 2);
    for (std::size_t a = 0; a < 2; ++a) {
      const double s = std::sqrt(static_cast<double>(counts[a]));
      for (std::size_t i = 0; i < inst.spec.p; ++i) w(i, a) = s * inst.spec.centers(i, a);
    }
    const SvdResult ws = thin_svd(w, 1);
    u1.assign(ws.left.col(0).begin(), ws.left.col(0).end());
  }

  std::vector<EntrywiseRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    EntrywiseRecord& rec = out[i];
    rec.i = i;
    const std::size_t truth = static_cast<std::size_t>(inst.z_star[i]);
    rec.misclustered =
        result.labels[i] != static_cast<int>((*result.matched_perm)[truth]);
    rec.threshold_simple = threshold;

    auto eps = inst.e_noise.col(i);
    double full2 = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double c = dot(full.left.col(j), eps);
      full2 += c * c;
    }
    rec.full_noise_norm = std::sqrt(full2);

    const SvdResult loo = thin_svd(leave_one_out(inst.x, i), r);
    double loo2 = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double c = dot(loo.left.col(j), eps);
      loo2 += c * c;
    }
    rec.loo_noise_norm = std::sqrt(loo2);

    if (symmetric) {
      // align u_hat_{1,-i} with the signal direction before signing
      const double align = dot(loo.left.col(0), u1);
      const double sgn_align = align >= 0.0 ? 1.0 : -1.0;
      const double u_eps = sgn_align * dot(loo.left.col(0), eps);
      const std::size_t matched = (*result.matched_perm)[truth];
      double u_theta = 0.0;
      for (std::size_t rr = 0; rr < inst.spec.p; ++rr)
        u_theta += u1[rr] * inst.spec.centers(rr, matched);
      rec.signed_stat = -2.0 * u_eps * (u_theta >= 0.0 ? 1.0 : -1.0);
    }
  }
  return out;
}

inline std::string entrywise_csv(const std::vector<EntrywiseRecord>& records) {
  std::ostringstream os;
  os << "i,misclustered,loo_noise_norm,full_noise_norm,threshold_simple,signed_stat\n";
  for (const auto& r : records) {
    os << (r.i + 1) << "," << (r.misclustered ? 1 : 0) << ","
       << format_double(r.loo_noise_norm) << "," << format_double(r.full_noise_norm) << ","
       << format_double(r.threshold_simple) << ","
       << (std::isnan(r.signed_stat) ? std::string("na") : format_double(r.signed_stat))
       << "\n";
  }
  return os.str();
}

}  // namespace loospec
