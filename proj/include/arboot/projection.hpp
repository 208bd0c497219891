#pragma once

// Linear-algebra kernel: partialling out controls, thin SVD of the
// instrument matrix, the ridge projection family P_theta, its off-diagonal
// Frobenius mass, leverage diagnostics, and the data-driven choice of the
// ridge regularizer.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "arboot/errors.hpp"

namespace arboot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct RawSample {
  VectorXd Y;   // outcome
  VectorXd X;   // endogenous regressor
  MatrixXd W;   // exogenous controls (may have zero columns)
  MatrixXd Z;   // instruments
};

struct PartialledSample {
  VectorXd Y;
  VectorXd X;
  MatrixXd Z;
  Eigen::Index n = 0;
  Eigen::Index K = 0;
  bool standardized = false;
};

struct SvdFactors {
  MatrixXd U;         // n x r, orthonormal columns
  MatrixXd V;         // K x r
  VectorXd s;         // positive singular values, descending
  Eigen::Index rank = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

struct RidgeProjection {
  double theta = 0.0;
  MatrixXd U;          // left singular vectors of Z
  VectorXd shrink;     // s_k^2 / (s_k^2 + theta)
  VectorXd diag;       // diagonal of P_theta
  double k_theta = 0.0;  // sum_{i != j} P_ij^2
  double p_n = 0.0;      // max_i sum_{j != i} P_ij^2 / k_theta
  double q_n = 0.0;      // max_i P_ii^2 / k_theta
  std::optional<MatrixXd> dense;  // materialized P for modest n

  double sqrt_k() const { return std::sqrt(k_theta); }
  Eigen::Index n() const { return diag.size(); }

  MatrixXd materialize() const {
    if (dense) return *dense;
    return U * shrink.asDiagonal() * U.transpose();
  }
};

struct LambdaSelection {
  std::optional<double> lambda;
  double theta_bar = 0.0;
  bool feasible = false;
  struct GridPoint {
    double theta;
    double q_criterion;
    double p_criterion;
    double k_theta;
  };
  std::vector<GridPoint> grid_evaluations;
};

// Residuals of Y, X and every instrument column after projecting onto the
// column space of W.
inline PartialledSample partial_out(const RawSample& raw) {
  const Eigen::Index n = raw.Y.size();
  PartialledSample out;
  out.n = n;
  out.K = raw.Z.cols();
  if (raw.W.cols() == 0) {
    out.Y = raw.Y;
    out.X = raw.X;
    out.Z = raw.Z;
    return out;
  }
  const Eigen::Index L = raw.W.cols();
  Eigen::JacobiSVD<MatrixXd> wsvd(raw.W);
  const double smax = wsvd.singularValues()(0);
  const double tol = smax * static_cast<double>(std::max(n, L)) *
                     std::numeric_limits<double>::epsilon();
  if (wsvd.singularValues()(L - 1) <= tol)
    throw RankDeficientControls("control matrix W is rank deficient");

  Eigen::HouseholderQR<MatrixXd> qr(raw.W);
  MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, L);
  auto annihilate = [&](const MatrixXd& A) -> MatrixXd {
    return A - Q * (Q.transpose() * A);
  };
  out.Y = annihilate(raw.Y);
  out.X = annihilate(raw.X);
  out.Z = annihilate(raw.Z);
  return out;
}

// Thin SVD with singular values below s_max * n * eps dropped.
inline SvdFactors svd_factorize(const MatrixXd& Z) {
  if (Z.size() == 0 || Z.isZero(0.0))
    throw ZeroMatrix("instrument matrix is identically zero");
  Eigen::BDCSVD<MatrixXd> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  const double tol = sv(0) *
                     static_cast<double>(std::max(Z.rows(), Z.cols())) *
                     std::numeric_limits<double>::epsilon();
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;
  SvdFactors f;
  f.U = svd.matrixU().leftCols(r);
  f.V = svd.matrixV().leftCols(r);
  f.s = sv.head(r);
  f.rank = r;
  f.rows = Z.rows();
  f.cols = Z.cols();
  return f;
}

inline double operator_norm_bound(const SvdFactors& f) {
  return f.s(0) * f.s(0);
}

namespace detail {

// Criteria for one theta, computed in O(n r) from the factors.
struct ThetaProfile {
  double k_theta;
  double max_diag_sq;      // max_i P_ii^2
  double max_offdiag_sq;   // max_i sum_{j != i} P_ij^2
};

inline ThetaProfile theta_profile(const MatrixXd& Usq, const VectorXd& s,
                                  double theta) {
  const VectorXd f = s.array().square() / (s.array().square() + theta);
  const VectorXd diag = Usq * f;
  const VectorXd rowsq = Usq * f.cwiseProduct(f).eval();
  ThetaProfile p;
  p.k_theta = f.squaredNorm() - diag.squaredNorm();
  p.max_diag_sq = diag.cwiseProduct(diag).maxCoeff();
  p.max_offdiag_sq = (rowsq - diag.cwiseProduct(diag)).maxCoeff();
  if (p.k_theta < 0.0) p.k_theta = 0.0;
  return p;
}

inline std::vector<double> theta_grid(double lo_anchor, double theta_bar,
                                      Eigen::Index interior) {
  std::vector<double> grid;
  if (lo_anchor <= 0.0 || lo_anchor >= theta_bar) {
    return grid;
  }
  const double ratio = theta_bar / lo_anchor;
  for (Eigen::Index j = 0; j < interior; ++j) {
    const double t =
        lo_anchor * std::pow(ratio, static_cast<double>(j) /
                                        static_cast<double>(interior));
    grid.push_back(t);
  }
  return grid;
}

}  // namespace detail

// P_theta from the factors: U diag(s^2/(s^2+theta)) U^T.  P is materialized
// whenever n <= dense_limit; above that only the diagonal and the scalar
// summaries are kept.
inline RidgeProjection ridge_projection_at(const SvdFactors& f, double theta,
                                           Eigen::Index dense_limit = 2000) {
  if (theta < 0.0) throw NegativeTheta("ridge penalty must be nonnegative");
  RidgeProjection P;
  P.theta = theta;
  P.U = f.U;
  P.shrink = f.s.array().square() / (f.s.array().square() + theta);
  const MatrixXd Usq = f.U.array().square().matrix();
  P.diag = Usq * P.shrink;
  const VectorXd rowsq = Usq * P.shrink.cwiseProduct(P.shrink).eval();
  P.k_theta = P.shrink.squaredNorm() - P.diag.squaredNorm();
  if (P.k_theta < 0.0) P.k_theta = 0.0;
  if (P.k_theta > 0.0) {
    P.q_n = P.diag.cwiseProduct(P.diag).maxCoeff() / P.k_theta;
    P.p_n = (rowsq - P.diag.cwiseProduct(P.diag)).maxCoeff() / P.k_theta;
    P.p_n = std::max(P.p_n, 0.0);
  } else {
    P.p_n = std::numeric_limits<double>::infinity();
    P.q_n = std::numeric_limits<double>::infinity();
  }
  if (f.rows <= dense_limit)
    P.dense = f.U * P.shrink.asDiagonal() * f.U.transpose();
  return P;
}

inline double k_theta(const RidgeProjection& P) { return P.k_theta; }

// (p_n, q_n); both are +inf when the off-diagonal mass vanishes (c/0 = +inf
// convention).
inline std::pair<double, double> leverage_diagnostics(const RidgeProjection& P) {
  return {P.p_n, P.q_n};
}

// Largest theta in [0, theta_bar] whose leverage criteria both stay below
// 1/sqrt(n): grid scan plus bisection refinement of the feasibility
// boundary.
inline LambdaSelection select_lambda(const SvdFactors& f, Eigen::Index n,
                                     Eigen::Index grid_size = 200) {
  const MatrixXd Usq = f.U.array().square().matrix();
  const double theta_bar = operator_norm_bound(f);
  const double budget = 1.0 / std::sqrt(static_cast<double>(n)) + 1e-12;

  LambdaSelection sel;
  sel.theta_bar = theta_bar;

  auto evaluate = [&](double theta) {
    const auto prof = detail::theta_profile(Usq, f.s, theta);
    double q = std::numeric_limits<double>::infinity();
    double p = std::numeric_limits<double>::infinity();
    if (prof.k_theta > 0.0) {
      q = prof.max_diag_sq / prof.k_theta;
      p = prof.max_offdiag_sq / prof.k_theta;
    }
    return LambdaSelection::GridPoint{theta, q, p, prof.k_theta};
  };
  auto is_feasible = [&](const LambdaSelection::GridPoint& g) {
    return g.q_criterion <= budget && g.p_criterion <= budget;
  };

  std::vector<double> grid;
  grid.push_back(0.0);
  const double smin = f.s(f.rank - 1);
  for (double t : detail::theta_grid(smin * smin * 1e-4, theta_bar,
                                     std::max<Eigen::Index>(grid_size - 2, 0)))
    grid.push_back(t);
  grid.push_back(theta_bar);

  std::ptrdiff_t best = -1;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    sel.grid_evaluations.push_back(evaluate(grid[i]));
    if (is_feasible(sel.grid_evaluations.back())) best = static_cast<std::ptrdiff_t>(i);
  }
  if (best < 0) {
    sel.feasible = false;
    return sel;
  }
  sel.feasible = true;
  double lambda = grid[static_cast<std::size_t>(best)];
  // Refine between the top feasible grid point and the next infeasible one.
  if (static_cast<std::size_t>(best + 1) < grid.size() &&
      !is_feasible(sel.grid_evaluations[static_cast<std::size_t>(best + 1)])) {
    double lo = lambda;
    double hi = grid[static_cast<std::size_t>(best + 1)];
    while (hi - lo > 1e-6 * std::max(hi, 1e-300)) {
      const double mid = 0.5 * (lo + hi);
      if (is_feasible(evaluate(mid)))
        lo = mid;
      else
        hi = mid;
    }
    lambda = lo;
  }
  sel.lambda = lambda;
  return sel;
}

}  // namespace arboot
