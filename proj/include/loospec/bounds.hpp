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
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "loospec/errors.hpp"
#include "loospec/io.hpp"
#include "loospec/matrix.hpp"
#include "loospec/mixture.hpp"
#include "loospec/subspace.hpp"
#include "loospec/svd.hpp"

namespace loospec {

enum class BoundKind { Wedin, LooGeneral, LooRelaxed, MixtureKappa, MixtureR };

/// One perturbation bound evaluation. `condition_value` is the gate quantity
/// (rho, rho0, tilde rho0, or the relaxed denominator); when the gate fails,
/// `applicable` is false and `value` is NaN. Inapplicable is a result, not an
/// error: Monte Carlo sweeps record gate failures.
struct BoundValue {
  BoundKind kind;
  double value = kNaN;
  double condition_value = kNaN;
  bool applicable = false;
};

namespace detail {

struct LooGeometry {
  double residual_norm;
  double gap;                    // sigma_r - sigma_{r+1}
  double sigma_r, sigma_r1;
  double rho;                    // gap / residual_norm, +inf at zero residual
  double coeff_ratio_l2;         // sqrt(sum_i (u_i^T y / sigma_i)^2)
  std::vector<double> in_span_coeffs;  // u_i^T y, i < r
};

inline LooGeometry loo_geometry(const SvdResult& svd_of_y, std::span<const double> y_n,
                                std::size_t r, bool need_coeff_ratio) {
  if (r < 1 || r > svd_of_y.size())
    throw InvalidInput("perturbation bound: rank out of range for the given SVD");
  if (svd_of_y.left.rows() != y_n.size())
    throw InvalidInput("perturbation bound: vector length does not match ambient dimension");
  LooGeometry g;
  g.sigma_r = svd_of_y.values[r - 1];
  g.sigma_r1 = svd_of_y.value_or_zero(r);
  g.gap = g.sigma_r - g.sigma_r1;

  g.in_span_coeffs.resize(r);
  std::vector<double> proj(y_n.size(), 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    const double c = dot(svd_of_y.left.col(j), y_n);
    g.in_span_coeffs[j] = c;
    axpy(c, svd_of_y.left.col(j), proj);
  }
  double res2 = 0.0;
  for (std::size_t i = 0; i < y_n.size(); ++i) {
    const double t = y_n[i] - proj[i];
    res2 += t * t;
  }
  g.residual_norm = std::sqrt(res2);
  g.rho = g.residual_norm > 0.0 ? g.gap / g.residual_norm : kInf;

  g.coeff_ratio_l2 = 0.0;
  if (need_coeff_ratio) {
    double s = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double sj = svd_of_y.values[j];
      if (sj <= 0.0) throw InvalidInput("perturbation bound: degenerate leading subspace");
      const double t = g.in_span_coeffs[j] / sj;
      s += t * t;
    }
    g.coeff_ratio_l2 = std::sqrt(s);
  }
  return g;
}

}  // namespace detail

/// Classical gap-over-perturbation bound: 2 ||(I - U_r U_r^T) y_n|| / (sigma_r
/// - sigma_{r+1}), valid when the gap strictly exceeds twice the residual.
inline BoundValue wedin_bound(const SvdResult& svd_of_y, std::span<const double> y_n,
                              std::size_t r) {
  const auto g = detail::loo_geometry(svd_of_y, y_n, r, false);
  BoundValue b{BoundKind::Wedin};
  b.condition_value = g.rho;
  b.applicable = g.gap > 2.0 * g.residual_norm;
  if (b.applicable) b.value = g.residual_norm == 0.0 ? 0.0 : 2.0 * g.residual_norm / g.gap;
  return b;
}

/// Leave-one-out bound (4 sqrt2 / rho) * sqrt(sum_i (u_i^T y_n / sigma_i)^2),
/// valid when rho = gap / residual > 2. A zero residual means the augmented
/// matrix equals Y', so rho = +inf and the bound is 0.
inline BoundValue loo_bound(const SvdResult& svd_of_y, std::span<const double> y_n,
                            std::size_t r) {
  const auto g = detail::loo_geometry(svd_of_y, y_n, r, true);
  BoundValue b{BoundKind::LooGeneral};
  b.condition_value = g.rho;
  b.applicable = g.rho > 2.0;
  if (b.applicable)
    b.value = g.residual_norm == 0.0 ? 0.0 : (4.0 * std::sqrt(2.0) / g.rho) * g.coeff_ratio_l2;
  return b;
}

/// Weakened-gate variant: 2 sqrt2 sigma_r ||res|| sqrt(sum s_i^2) /
/// (sigma_r^2 - sigma_{r+1}^2 - ||res||^2), valid when that denominator is
/// positive. Under rho > 2 it never exceeds loo_bound.
inline BoundValue loo_bound_relaxed(const SvdResult& svd_of_y, std::span<const double> y_n,
                                    std::size_t r) {
  const auto g = detail::loo_geometry(svd_of_y, y_n, r, true);
  BoundValue b{BoundKind::LooRelaxed};
  const double denom =
      g.sigma_r * g.sigma_r - g.sigma_r1 * g.sigma_r1 - g.residual_norm * g.residual_norm;
  b.condition_value = denom;
  b.applicable = denom > 0.0;
  if (b.applicable)
    b.value = 2.0 * std::sqrt(2.0) * g.sigma_r * g.residual_norm * g.coeff_ratio_l2 / denom;
  return b;
}

/// || U_r(X) U_r(X)^T - U_r(X_-i) U_r(X_-i)^T ||_F, the quantity the bounds
/// above control.
inline double actual_loo_distance(const Matrix& x, std::size_t i, std::size_t r) {
  if (x.cols() < 2) throw InvalidInput("actual_loo_distance: need at least two columns");
  if (r < 1 || r > std::min(x.rows(), x.cols() - 1))
    throw InvalidInput("actual_loo_distance: rank out of range");
  const SvdResult full = thin_svd(x, r);
  const SvdResult loo = thin_svd(leave_one_out(x, i), r);
  return projector_distance(leading_left_basis(full, r), leading_left_basis(loo, r));
}

/// Shared right-hand side of the mixture bounds:
/// (128 / gate) * (sqrt(k r / (beta n)) + noise_ratio).
inline double mixture_bound_formula(double gate, std::size_t k, std::size_t r, double beta,
                                    std::size_t n, double noise_ratio) {
  const double kr = static_cast<double>(k) * static_cast<double>(r);
  const double bn = beta * static_cast<double>(n);
  return (128.0 / gate) * (std::sqrt(kr / bn) + noise_ratio);
}

namespace detail {

struct MixtureGates {
  double beta;
  double cluster_ratio;  // beta n / k^2
  std::vector<double> lambda;
  std::size_t kappa;
  double e_opnorm;
};

inline MixtureGates mixture_gates(const MixtureInstance& inst) {
  MixtureGates g;
  std::vector<std::size_t> counts(inst.spec.k, 0);
  for (int z : inst.z_star) counts[static_cast<std::size_t>(z)]++;
  const std::size_t min_count = *std::min_element(counts.begin(), counts.end());
  g.beta = static_cast<double>(inst.spec.k) * static_cast<double>(min_count) /
           static_cast<double>(inst.spec.n);
  g.cluster_ratio = g.beta * static_cast<double>(inst.spec.n) /
                    (static_cast<double>(inst.spec.k) * static_cast<double>(inst.spec.k));
  g.lambda = signal_singular_values(inst);
  g.kappa = numeric_rank(g.lambda);
  if (g.kappa == 0) throw InvalidInput("mixture bound: signal matrix has rank zero");
  g.e_opnorm = operator_norm(inst.e_noise);
  return g;
}

/// (128 / gate) * (sqrt(k r / (beta n)) + ||U_loo^T eps_i|| / lambda_r)
inline BoundValue mixture_value(const MixtureInstance& inst, std::size_t i, std::size_t r,
                                double gate, double lambda_r, double beta, BoundKind kind,
                                const SvdResult* loo_svd) {
  BoundValue b{kind};
  b.condition_value = gate;
  const double ratio =
      beta * static_cast<double>(inst.spec.n) /
      (static_cast<double>(inst.spec.k) * static_cast<double>(inst.spec.k));
  b.applicable = gate > 16.0 && ratio >= 10.0;
  if (!b.applicable) return b;

  SvdResult local;
  if (!loo_svd) {
    local = thin_svd(leave_one_out(inst.x, i), r);
    loo_svd = &local;
  }
  if (loo_svd->size() < r) throw InvalidInput("mixture bound: leave-one-out SVD too small");
  double noise2 = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    const double c = dot(loo_svd->left.col(j), inst.e_noise.col(i));
    noise2 += c * c;
  }
  b.value = mixture_bound_formula(gate, inst.spec.k, r, beta, inst.spec.n,
                                  std::sqrt(noise2) / lambda_r);
  return b;
}

}  // namespace detail

/// Mixture bound at the signal rank kappa, gated on rho0 = lambda_kappa/||E||
/// > 16 and beta n / k^2 >= 10. Needs ground-truth P and E, so this is a
/// simulation diagnostic.
inline BoundValue mixture_loo_bound(const MixtureInstance& inst, std::size_t i,
                                    const SvdResult* loo_svd = nullptr) {
  if (i >= inst.spec.n) throw InvalidInput("mixture_loo_bound: column out of range");
  const auto g = detail::mixture_gates(inst);
  const double lambda_kappa = g.lambda[g.kappa - 1];
  const double rho0 = g.e_opnorm > 0.0 ? lambda_kappa / g.e_opnorm : kInf;
  return detail::mixture_value(inst, i, g.kappa, rho0, lambda_kappa, g.beta,
                               BoundKind::MixtureKappa, loo_svd);
}

/// Rank-r variant gated on tilde rho0 = (lambda_r - lambda_{r+1}) /
/// max(||E||, sqrt(k^2/(beta n)) lambda_{r+1}) > 16. Reduces to
/// mixture_loo_bound when r = kappa because lambda_{kappa+1} = 0.
inline BoundValue mixture_loo_bound_r(const MixtureInstance& inst, std::size_t i, std::size_t r,
                                      const SvdResult* loo_svd = nullptr) {
  if (i >= inst.spec.n) throw InvalidInput("mixture_loo_bound_r: column out of range");
  if (r < 1 || r > inst.spec.k) throw InvalidInput("mixture_loo_bound_r: r must be in [1, k]");
  const auto g = detail::mixture_gates(inst);
  const double lambda_r = r <= g.lambda.size() ? g.lambda[r - 1] : 0.0;
  const double lambda_r1 = r < g.lambda.size() ? g.lambda[r] : 0.0;
  const double k2bn = static_cast<double>(inst.spec.k) * static_cast<double>(inst.spec.k) /
                      (g.beta * static_cast<double>(inst.spec.n));
  const double denom = std::max(g.e_opnorm, std::sqrt(k2bn) * lambda_r1);
  const double gate = denom > 0.0 ? (lambda_r - lambda_r1) / denom : kInf;
  return detail::mixture_value(inst, i, r, gate, lambda_r, g.beta, BoundKind::MixtureR,
                               loo_svd);
}

/// Per-column record of every bound plus the exact distance they dominate.
struct BoundReport {
  std::size_t column_index = 0;  // 0-based
  double actual_distance = 0.0;
  BoundValue wedin, loo, loo_relaxed;
  std::optional<BoundValue> mixture_kappa, mixture_r;
  double residual_norm = 0.0;
  std::vector<double> in_span_coeffs;
  double spectral_gap = 0.0;
};

/// Tabulate all bounds for every column of X at rank r. When a mixture
/// instance is supplied (its X must be the same matrix), the mixture bounds
/// are evaluated too.
inline std::vector<BoundReport> bound_report(const Matrix& x, std::size_t r,
                                             const MixtureInstance* inst = nullptr) {
  if (x.cols() < 2) throw InvalidInput("bound_report: need at least two columns");
  if (r < 1 || r > std::min(x.rows(), x.cols() - 1))
    throw InvalidInput("bound_report: rank out of range");
  const SvdResult full = thin_svd(x, r);
  const SubspaceBasis full_basis = leading_left_basis(full, r);

  std::optional<detail::MixtureGates> gates;
  if (inst) gates = detail::mixture_gates(*inst);

  std::vector<BoundReport> out;
  out.reserve(x.cols());
  for (std::size_t i = 0; i < x.cols(); ++i) {
    BoundReport rep;
    rep.column_index = i;
    const Matrix y = leave_one_out(x, i);
    const SvdResult loo_svd = thin_svd(y);
    rep.actual_distance =
        projector_distance(full_basis, leading_left_basis(loo_svd, r));

    const auto col = x.col(i);
    rep.wedin = wedin_bound(loo_svd, col, r);
    const bool degenerate = loo_svd.values[r - 1] <= 0.0;
    if (degenerate) {
      rep.loo = BoundValue{BoundKind::LooGeneral};
      rep.loo_relaxed = BoundValue{BoundKind::LooRelaxed};
    } else {
      rep.loo = loo_bound(loo_svd, col, r);
      rep.loo_relaxed = loo_bound_relaxed(loo_svd, col, r);
    }
    const auto g = detail::loo_geometry(loo_svd, col, r, false);
    rep.residual_norm = g.residual_norm;
    rep.in_span_coeffs = g.in_span_coeffs;
    rep.spectral_gap = g.gap;

    if (inst) {
      rep.mixture_kappa = mixture_loo_bound(*inst, i);
      if (r <= inst->spec.k) rep.mixture_r = mixture_loo_bound_r(*inst, i, r);
    }
    out.push_back(std::move(rep));
  }
  return out;
}

inline std::string bound_report_csv_header() {
  return "column_index,actual,rho,wedin,wedin_applicable,loo,loo_applicable,"
         "loo_relaxed,relaxed_applicable,mixture_kappa,mixture_r,residual_norm,gap";
}

/// CSV rows in the fixed schema. Column indices are 1-based on disk, matching
/// the assignment-file convention; inapplicable or absent bounds print "na".
inline std::string bound_report_csv(const std::vector<BoundReport>& reports) {
  std::ostringstream os;
  os << bound_report_csv_header() << "\n";
  auto value_or_na = [](const BoundValue& b) {
    return b.applicable ? format_double(b.value) : std::string("na");
  };
  for (const auto& r : reports) {
    // wedin's gate quantity is rho and is defined even when the loo bound
    // could not be evaluated
    os << (r.column_index + 1) << "," << format_double(r.actual_distance) << ","
       << format_double(r.wedin.condition_value) << "," << value_or_na(r.wedin) << ","
       << (r.wedin.applicable ? 1 : 0) << "," << value_or_na(r.loo) << ","
       << (r.loo.applicable ? 1 : 0) << "," << value_or_na(r.loo_relaxed) << ","
       << (r.loo_relaxed.applicable ? 1 : 0) << ","
       << (r.mixture_kappa ? value_or_na(*r.mixture_kappa) : "na") << ","
       << (r.mixture_r ? value_or_na(*r.mixture_r) : "na") << ","
       << format_double(r.residual_norm) << "," << format_double(r.spectral_gap) << "\n";
  }
  return os.str();
}

}  // namespace loospec
