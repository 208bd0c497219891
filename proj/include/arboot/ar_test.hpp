#pragma once

// Bootstrap dimension-agnostic AR test: restricted residuals, jackknifed
// quadratic-form statistic, multiplier-bootstrap draws and critical value,
// and the weighted-chi-square spectrum used as a fixed-K validation oracle.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arboot/errors.hpp"
#include "arboot/projection.hpp"
#include "arboot/rng.hpp"

namespace arboot {

struct Hypothesis {
  double beta0 = 0.0;
};

enum class WeightLaw { Rademacher, StandardNormal, DegenerateOne };

struct BootstrapConfig {
  Eigen::Index draws = 2000;
  double alpha = 0.05;
  WeightLaw weight_law = WeightLaw::Rademacher;
  std::uint64_t seed = 0;
};

enum class Method { BS, JARstd, JARcf, AR, RJAR, BCCH, CT };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::BS: return "bs";
    case Method::JARstd: return "jar_std";
    case Method::JARcf: return "jar_cf";
    case Method::AR: return "ar";
    case Method::RJAR: return "rjar";
    case Method::BCCH: return "bcch";
    case Method::CT: return "ct";
  }
  return "?";
}

struct TestResult {
  Method method = Method::BS;
  double statistic = 0.0;
  double critical_value = 0.0;
  bool reject = false;
  double alpha = 0.05;
  std::map<std::string, double> meta;
};

inline VectorXd residuals(const PartialledSample& sample, const Hypothesis& h) {
  return sample.Y - h.beta0 * sample.X;
}

// sum_{i != j} e_i P_ij e_j / sqrt(K_theta), via the factor identity
// e'Pe - sum_i P_ii e_i^2.
inline double q_statistic(const VectorXd& e, const RidgeProjection& P) {
  if (P.k_theta <= 0.0) throw ZeroKLambda("off-diagonal mass K is zero");
  const VectorXd t = P.U.transpose() * e;
  const double quad = t.cwiseProduct(t).dot(P.shrink);
  const double num = quad - P.diag.dot(e.cwiseProduct(e));
  return num / P.sqrt_k();
}

inline double bootstrap_draw(const VectorXd& e, const RidgeProjection& P,
                             const VectorXd& eta) {
  return q_statistic(eta.cwiseProduct(e), P);
}

inline void fill_weights(VectorXd& eta, WeightLaw law, PhiloxStream& stream) {
  switch (law) {
    case WeightLaw::Rademacher:
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = stream.rademacher();
      break;
    case WeightLaw::StandardNormal:
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = stream.normal();
      break;
    case WeightLaw::DegenerateOne:
      eta.setOnes();
      break;
  }
}

namespace detail {
constexpr std::uint64_t kBootstrapWeightRole = 0x42;
}

// All B bootstrap draws, draw d keyed by (seed, d) so the result does not
// depend on evaluation order.  Draws are evaluated in column blocks so the
// inner work is two GEMMs per block.
inline std::vector<double> bootstrap_draws(const VectorXd& e,
                                           const RidgeProjection& P,
                                           const BootstrapConfig& cfg) {
  if (P.k_theta <= 0.0) throw ZeroKLambda("off-diagonal mass K is zero");
  const Eigen::Index n = e.size();
  const Eigen::Index B = cfg.draws;
  const double inv_sqrt_k = 1.0 / P.sqrt_k();
  std::vector<double> draws(static_cast<std::size_t>(B));

  const Eigen::Index block = std::min<Eigen::Index>(B, 256);
  MatrixXd V(n, block);
  VectorXd eta(n);
  for (Eigen::Index start = 0; start < B; start += block) {
    const Eigen::Index m = std::min(block, B - start);
    for (Eigen::Index d = 0; d < m; ++d) {
      PhiloxStream stream(cfg.seed, static_cast<std::uint64_t>(start + d),
                          detail::kBootstrapWeightRole);
      fill_weights(eta, cfg.weight_law, stream);
      V.col(d) = eta.cwiseProduct(e);
    }
    const MatrixXd T = P.U.transpose() * V.leftCols(m);
    for (Eigen::Index d = 0; d < m; ++d) {
      const double quad = T.col(d).cwiseProduct(T.col(d)).dot(P.shrink);
      const double corr = P.diag.dot(V.col(d).cwiseProduct(V.col(d)));
      draws[static_cast<std::size_t>(start + d)] = (quad - corr) * inv_sqrt_k;
    }
  }
  return draws;
}

// Upper order statistic at rank ceil((1-alpha) B), 1-based.
inline double upper_order_statistic(std::vector<double> draws, double alpha) {
  const auto B = static_cast<double>(draws.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * B));
  rank = std::clamp<std::size_t>(rank, 1, draws.size());
  std::nth_element(draws.begin(), draws.begin() + (rank - 1), draws.end());
  return draws[rank - 1];
}

inline double critical_value(const VectorXd& e, const RidgeProjection& P,
                             const BootstrapConfig& cfg) {
  return upper_order_statistic(bootstrap_draws(e, P, cfg), cfg.alpha);
}

// Scale every instrument column so its mean square is one.
inline PartialledSample standardize_instruments(PartialledSample sample) {
  const auto n = static_cast<double>(sample.n);
  for (Eigen::Index j = 0; j < sample.Z.cols(); ++j) {
    const double ms = sample.Z.col(j).squaredNorm() / n;
    if (ms <= 0.0) throw ZeroColumn("instrument column " + std::to_string(j) +
                                    " is identically zero");
    sample.Z.col(j) /= std::sqrt(ms);
  }
  sample.standardized = true;
  return sample;
}

struct BsOptions {
  std::optional<double> lambda_override;
  Eigen::Index grid_size = 200;
  Eigen::Index dense_limit = 2000;
};

// Full bootstrap AR pipeline on a partialled sample: standardize unless
// already done, pick lambda, form the statistic and its bootstrap critical
// value.
inline TestResult bs_test(const PartialledSample& sample, const Hypothesis& h,
                          const BootstrapConfig& cfg,
                          const BsOptions& opts = {}) {
  PartialledSample work =
      sample.standardized ? sample : standardize_instruments(sample);
  const SvdFactors f = svd_factorize(work.Z);

  double lambda = 0.0;
  double feasible = 1.0;
  double theta_bar = operator_norm_bound(f);
  if (opts.lambda_override) {
    lambda = *opts.lambda_override;
  } else {
    const LambdaSelection sel = select_lambda(f, work.n, opts.grid_size);
    theta_bar = sel.theta_bar;
    if (!sel.feasible)
      throw DegenerateInstruments(
          "no ridge penalty satisfies the leverage criteria");
    lambda = *sel.lambda;
  }

  const RidgeProjection P = ridge_projection_at(f, lambda, opts.dense_limit);
  const VectorXd e = residuals(work, h);
  TestResult res;
  res.method = Method::BS;
  res.alpha = cfg.alpha;
  res.statistic = q_statistic(e, P);
  res.critical_value = critical_value(e, P, cfg);
  res.reject = res.statistic > res.critical_value;
  res.meta["lambda"] = lambda;
  res.meta["theta_bar"] = theta_bar;
  res.meta["k_lambda"] = P.k_theta;
  res.meta["p_n"] = P.p_n;
  res.meta["q_n"] = P.q_n;
  res.meta["draws"] = static_cast<double>(cfg.draws);
  res.meta["feasible"] = feasible;
  return res;
}

// Eigenvalues of D^{1/2} (P - diag P) D^{1/2} / sqrt(K_theta) with
// D = diag(sigma2): the weights of the fixed-K weighted-chi-square null law.
// Validation-only.
inline VectorXd null_spectrum_oracle(const RidgeProjection& P,
                                     const VectorXd& sigma2) {
  MatrixXd A = P.materialize();
  A.diagonal().setZero();
  const VectorXd sigma = sigma2.cwiseSqrt();
  A = sigma.asDiagonal() * A * sigma.asDiagonal();
  A /= P.sqrt_k();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace arboot
