#pragma once

// The six benchmark tests: jackknife AR with standard and cross-fit
// variance estimators, the classical heteroskedasticity-robust AR test,
// the ridge-regularized jackknife AR test with its own regularizer rule,
// the sup-score test, and the ridge-ratio test with a residual bootstrap.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "arboot/ar_test.hpp"
#include "arboot/errors.hpp"
#include "arboot/projection.hpp"
#include "arboot/quantiles.hpp"
#include "arboot/rng.hpp"

namespace arboot {

struct GammaStarSelection {
  double gamma_star = 0.0;
  Eigen::Index r_n = 0;
  std::vector<std::pair<double, double>> objective_trace;  // (gamma, K_gamma)
};

namespace detail {

// Exact column-space projection P = U U^T; requires Z'Z invertible.
inline RidgeProjection exact_projection(const PartialledSample& sample) {
  const SvdFactors f = svd_factorize(sample.Z);
  if (f.rank < sample.K || sample.K >= sample.n)
    throw SingularGram("Z'Z is not invertible");
  return ridge_projection_at(f, 0.0);
}

// sum_{i != j} P_ij^2 e_i^2 e_j^2 for a dense symmetric P.
inline double offdiag_pair_sum(const MatrixXd& P, const VectorXd& esq) {
  const MatrixXd Psq = P.cwiseProduct(P);
  double total = esq.dot(Psq * esq);
  total -= Psq.diagonal().dot(esq.cwiseProduct(esq));
  return total;
}

inline double offdiag_quadratic(const MatrixXd& P, const VectorXd& e) {
  return e.dot(P * e) - P.diagonal().dot(e.cwiseProduct(e));
}

}  // namespace detail

// Jackknife AR with the standard variance estimator, normal critical value.
inline TestResult jar_std(const PartialledSample& sample, const Hypothesis& h,
                          double alpha) {
  const RidgeProjection proj = detail::exact_projection(sample);
  const MatrixXd P = proj.materialize();
  const VectorXd e = residuals(sample, h);
  const VectorXd esq = e.cwiseProduct(e);
  const auto K = static_cast<double>(sample.K);

  const double num = detail::offdiag_quadratic(P, e);
  const double phi = (2.0 / K) * detail::offdiag_pair_sum(P, esq);
  TestResult res;
  res.method = Method::JARstd;
  res.alpha = alpha;
  res.statistic = num / (std::sqrt(phi) * std::sqrt(K));
  res.critical_value = normal_quantile(1.0 - alpha);
  res.reject = res.statistic > res.critical_value;
  res.meta["phi_std"] = phi;
  return res;
}

// Jackknife AR with the cross-fit variance estimator, clamped below at
// 1/sqrt(n log n).
inline TestResult jar_cf(const PartialledSample& sample, const Hypothesis& h,
                         double alpha) {
  const RidgeProjection proj = detail::exact_projection(sample);
  const MatrixXd P = proj.materialize();
  const Eigen::Index n = sample.n;
  const auto K = static_cast<double>(sample.K);
  const VectorXd e = residuals(sample, h);

  const MatrixXd M = MatrixXd::Identity(n, n) - P;
  const VectorXd Me = M * e;
  double phi = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double den = M(i, i) * M(j, j) + M(i, j) * M(i, j);
      phi += P(i, j) * P(i, j) / den * (e(i) * Me(i)) * (e(j) * Me(j));
    }
  }
  phi *= 2.0 * (2.0 / K);  // symmetric pairs, then the 2/K prefactor
  const double floor =
      1.0 / std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(n)));
  const double phi_clamped = std::max(phi, floor);

  TestResult res;
  res.method = Method::JARcf;
  res.alpha = alpha;
  res.statistic =
      detail::offdiag_quadratic(P, e) / (std::sqrt(phi_clamped) * std::sqrt(K));
  res.critical_value = normal_quantile(1.0 - alpha);
  res.reject = res.statistic > res.critical_value;
  res.meta["phi_cf"] = phi;
  res.meta["clamped"] = (phi < floor) ? 1.0 : 0.0;
  return res;
}

// Classical heteroskedasticity-robust AR, chi-square critical value.
inline TestResult classical_ar(const PartialledSample& sample,
                               const Hypothesis& h, double alpha) {
  const VectorXd e = residuals(sample, h);
  const double n = static_cast<double>(sample.n);
  const VectorXd J = sample.Z.transpose() * e / std::sqrt(n);
  const MatrixXd Omega =
      sample.Z.transpose() * e.cwiseProduct(e).asDiagonal() * sample.Z / n;

  Eigen::LDLT<MatrixXd> ldlt(Omega);
  const VectorXd d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  if (ldlt.info() != Eigen::Success || dmax <= 0.0 ||
      d.minCoeff() <= dmax * sample.K * std::numeric_limits<double>::epsilon())
    throw SingularOmega("variance matrix Omega is singular");

  TestResult res;
  res.method = Method::AR;
  res.alpha = alpha;
  res.statistic = J.dot(ldlt.solve(J));
  res.critical_value = chi_square_quantile(1.0 - alpha, static_cast<double>(sample.K));
  res.reject = res.statistic > res.critical_value;
  return res;
}

// max argmax over the admissible set of the off-diagonal Frobenius mass.
// Grid scan, golden-section refinement around an interior maximizer, ties
// broken upward.
inline GammaStarSelection gamma_star(const SvdFactors& f, Eigen::Index n,
                                     Eigen::Index grid_size = 200) {
  (void)n;
  GammaStarSelection sel;
  sel.r_n = f.rank;
  const double lo_bound = (f.rank == f.cols) ? 0.0 : 1.0;
  const double theta_bar = operator_norm_bound(f);
  const MatrixXd Usq = f.U.array().square().matrix();

  auto objective = [&](double gamma) {
    return detail::theta_profile(Usq, f.s, gamma).k_theta;
  };

  std::vector<double> grid;
  grid.push_back(lo_bound);
  const double smin = f.s(f.rank - 1);
  const double anchor = std::max(smin * smin * 1e-4, lo_bound > 0.0 ? lo_bound : 0.0);
  const double hi = std::max(theta_bar, lo_bound * 2.0 + 1.0);
  for (double t : detail::theta_grid(std::max(anchor, 1e-12), hi,
                                     std::max<Eigen::Index>(grid_size - 2, 0)))
    if (t > lo_bound) grid.push_back(t);
  grid.push_back(hi);

  std::size_t best = 0;
  double best_val = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double val = objective(grid[i]);
    sel.objective_trace.emplace_back(grid[i], val);
    // "max argmax": prefer the larger gamma among (near-)ties.
    if (val > best_val * (1.0 + 1e-9) ||
        (val >= best_val * (1.0 - 1e-9) && grid[i] > grid[best])) {
      best = i;
      best_val = val;
    }
  }

  double gamma = grid[best];
  if (best > 0 && best + 1 < grid.size() &&
      sel.objective_trace[best - 1].second < best_val &&
      sel.objective_trace[best + 1].second < best_val) {
    // Interior maximizer: golden-section within the bracketing interval.
    const double phi_ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = grid[best - 1], b = grid[best + 1];
    double x1 = b - phi_ratio * (b - a);
    double x2 = a + phi_ratio * (b - a);
    double f1 = objective(x1), f2 = objective(x2);
    while (b - a > 1e-8 * std::max(1.0, b)) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + phi_ratio * (b - a);
        f2 = objective(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - phi_ratio * (b - a);
        f1 = objective(x1);
      }
    }
    gamma = 0.5 * (a + b);
  }
  sel.gamma_star = gamma;
  return sel;
}

// Ridge-regularized jackknife AR at gamma*.
inline TestResult rjar(const PartialledSample& sample, const Hypothesis& h,
                       double alpha) {
  const SvdFactors f = svd_factorize(sample.Z);
  const GammaStarSelection sel = gamma_star(f, sample.n);
  const RidgeProjection proj = ridge_projection_at(f, sel.gamma_star);
  const MatrixXd P = proj.materialize();
  const VectorXd e = residuals(sample, h);
  const VectorXd esq = e.cwiseProduct(e);
  const auto r_n = static_cast<double>(sel.r_n);

  const double num = detail::offdiag_quadratic(P, e);
  const double phi = (2.0 / r_n) * detail::offdiag_pair_sum(P, esq);
  TestResult res;
  res.method = Method::RJAR;
  res.alpha = alpha;
  res.statistic = num / (std::sqrt(phi) * std::sqrt(r_n));
  res.critical_value = normal_quantile(1.0 - alpha);
  res.reject = res.statistic > res.critical_value;
  res.meta["gamma_star"] = sel.gamma_star;
  res.meta["r_n"] = r_n;
  return res;
}

// Sup-score test with the Bonferroni-style normal critical value and the
// 1.1 constant.  Columns with a vanishing denominator are dropped and the
// quantile uses the reduced count.
inline TestResult sup_score_bcch(const PartialledSample& sample,
                                 const Hypothesis& h, double alpha) {
  const VectorXd e = residuals(sample, h);
  const VectorXd esq = e.cwiseProduct(e);
  double stat = -std::numeric_limits<double>::infinity();
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < sample.K; ++j) {
    const double den = esq.dot(sample.Z.col(j).cwiseProduct(sample.Z.col(j)));
    if (den <= 0.0) continue;
    ++kept;
    stat = std::max(stat, std::fabs(e.dot(sample.Z.col(j))) / std::sqrt(den));
  }
  if (kept == 0)
    throw DegenerateColumn("every instrument column has a zero denominator");

  TestResult res;
  res.method = Method::BCCH;
  res.alpha = alpha;
  res.statistic = stat;
  res.critical_value =
      1.1 * normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(kept)));
  res.reject = res.statistic > res.critical_value;
  res.meta["columns_used"] = static_cast<double>(kept);
  return res;
}

// Ridge-ratio test with fixed regularizer 0.05 and a residual bootstrap:
// the restricted residuals are centered and resampled i.i.d. with
// replacement, and the ratio statistic is recomputed per draw.
inline TestResult ct_test(const PartialledSample& sample, const Hypothesis& h,
                          double alpha, Eigen::Index boot_draws,
                          std::uint64_t seed) {
  const SvdFactors f = svd_factorize(sample.Z);
  const double theta = 0.05;
  const VectorXd shrink = f.s.array().square() / (f.s.array().square() + theta);
  const VectorXd e = residuals(sample, h);
  const auto n = static_cast<double>(sample.n);

  auto ratio_statistic = [&](const VectorXd& r) {
    const VectorXd t = f.U.transpose() * r;
    const double quad = t.cwiseProduct(t).dot(shrink);
    const double den = r.squaredNorm() - quad;
    if (den <= 0.0)
      throw DegenerateDenominator("residuals lie in the range of P");
    return n * quad / den;
  };

  TestResult res;
  res.method = Method::CT;
  res.alpha = alpha;
  res.statistic = ratio_statistic(e);

  const VectorXd centered = e.array() - e.mean();
  std::vector<double> draws(static_cast<std::size_t>(boot_draws));
  VectorXd estar(sample.n);
  for (Eigen::Index b = 0; b < boot_draws; ++b) {
    PhiloxStream stream(seed, static_cast<std::uint64_t>(b),
                        detail::kBootstrapWeightRole + 1);
    for (Eigen::Index i = 0; i < sample.n; ++i) {
      const auto idx = static_cast<Eigen::Index>(
          stream() % static_cast<std::uint64_t>(sample.n));
      estar(i) = centered(idx);
    }
    draws[static_cast<std::size_t>(b)] = ratio_statistic(estar);
  }
  res.critical_value = upper_order_statistic(std::move(draws), alpha);
  res.reject = res.statistic > res.critical_value;
  res.meta["theta"] = theta;
  res.meta["draws"] = static_cast<double>(boot_draws);
  return res;
}

}  // namespace arboot
