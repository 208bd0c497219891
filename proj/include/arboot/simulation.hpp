#pragma once

// Data-generating processes for the two simulation designs and a
// deterministic Monte Carlo harness for size tables and power curves.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "arboot/ar_test.hpp"
#include "arboot/competitors.hpp"
#include "arboot/errors.hpp"
#include "arboot/rng.hpp"

namespace arboot {

enum class DgpFamily { DKM, Hausman };
enum class FirstStage { Sparse, Dense, NotApplicable };

struct DgpSpec {
  DgpFamily family = DgpFamily::DKM;
  Eigen::Index n = 100;
  Eigen::Index K = 1;
  double mu2 = 30.0;
  FirstStage first_stage = FirstStage::Sparse;
  double beta = 1.0;
  double beta0 = 1.0;
};

struct MonteCarloConfig {
  Eigen::Index replications = 2000;
  Eigen::Index bootstrap_draws = 2000;
  double alpha = 0.05;
  std::uint64_t master_seed = 1;
  std::set<Method> tests = {Method::BS};
  std::vector<double> beta_grid;  // empty for size experiments
  Eigen::Index threads = 0;       // 0: hardware concurrency
};

struct RejectionRow {
  Method method;
  Eigen::Index K = 0;
  double beta = 0.0;
  double rejection_rate = 0.0;
  double mc_std_error = 0.0;
  double mean_regularizer = std::numeric_limits<double>::quiet_NaN();
  Eigen::Index failures = 0;
};

struct RejectionTable {
  Eigen::Index replications = 0;
  std::vector<RejectionRow> rows;

  static constexpr const char* csv_header =
      "method,K,beta,rejection_rate,mc_se,mean_regularizer,failures";

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << csv_header << "\n";
    for (const auto& r : rows) {
      os << method_name(r.method) << "," << r.K << "," << r.beta << ","
         << r.rejection_rate << "," << r.mc_std_error << ",";
      if (std::isnan(r.mean_regularizer))
        os << "";
      else
        os << r.mean_regularizer;
      os << "," << r.failures << "\n";
    }
    return os.str();
  }
};

// Stream roles used when deriving per-replication generator streams.
namespace stream_role {
constexpr std::uint64_t kInstruments = 1;
constexpr std::uint64_t kErrors = 2;
constexpr std::uint64_t kBootstrapSeed = 3;
}  // namespace stream_role

// First-stage pattern kappa for the DKM design; kappa = 1 when K = 1.
inline VectorXd dkm_kappa(const DgpSpec& spec) {
  VectorXd kappa = VectorXd::Zero(spec.K);
  if (spec.K == 1) {
    kappa(0) = 1.0;
    return kappa;
  }
  Eigen::Index active;
  if (spec.first_stage == FirstStage::Sparse) {
    if (spec.K < 5) throw InvalidSparsity("sparse first stage needs K >= 5");
    active = 5;
  } else if (spec.first_stage == FirstStage::Dense) {
    active = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::lround(0.4 * static_cast<double>(spec.K))));
  } else {
    throw InvalidSparsity("first-stage pattern required for the DKM design");
  }
  kappa.head(active).setOnes();
  return kappa;
}

// Homoskedastic design: Gaussian instruments, jointly normal errors with
// covariance [[2, 1.2], [1.2, 1]], first stage pi = zeta * kappa scaled so
// n pi'pi equals the concentration parameter.
inline RawSample gen_dkm(const DgpSpec& spec, std::uint64_t seed,
                         std::uint64_t replication = 0) {
  const Eigen::Index n = spec.n;
  const Eigen::Index K = spec.K;
  const VectorXd kappa = dkm_kappa(spec);
  const double zeta =
      std::sqrt(spec.mu2 / (static_cast<double>(n) * kappa.squaredNorm()));
  const VectorXd pi = zeta * kappa;

  PhiloxStream zs(seed, replication, stream_role::kInstruments);
  MatrixXd Z(n, K);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < K; ++j) Z(i, j) = zs.normal();

  // Cholesky of [[2, 1.2], [1.2, 1]].
  const double l11 = std::sqrt(2.0);
  const double l21 = 1.2 / l11;
  const double l22 = std::sqrt(1.0 - l21 * l21);
  PhiloxStream es(seed, replication, stream_role::kErrors);
  VectorXd eps(n), v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g1 = es.normal();
    const double g2 = es.normal();
    eps(i) = l11 * g1;
    v(i) = l21 * g1 + l22 * g2;
  }

  RawSample raw;
  raw.Z = Z;
  raw.X = Z * pi + v;
  raw.Y = spec.beta * raw.X + eps;
  raw.W = MatrixXd::Ones(n, 1);
  return raw;
}

// Heteroskedastic design: polynomial-and-dummy instruments built from a
// single underlying variable, outcome error scaled by sqrt(1 + z1^2).
inline RawSample gen_hausman(const DgpSpec& spec, std::uint64_t seed,
                             std::uint64_t replication = 0) {
  const Eigen::Index n = spec.n;
  const Eigen::Index K = spec.K;
  if (K != 1 && K < 10)
    throw UnsupportedK("the design is defined only for K = 1 or K >= 10");
  const double rho = 0.3, phi = 0.3;
  const double mix = std::sqrt((1.0 - rho * rho) /
                               (phi * phi + 0.86 * 0.86 * 0.86 * 0.86));
  const double pi_scale =
      (K == 1 ? 0.6 : 0.2) / std::sqrt(static_cast<double>(K));

  PhiloxStream zs(seed, replication, stream_role::kInstruments);
  PhiloxStream es(seed, replication, stream_role::kErrors);
  VectorXd z1(n), e(n), u2(n), scale(n);
  MatrixXd Z(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    z1(i) = 0.5 + zs.normal();
    const double v1 = z1(i) * (es.arcsine_beta() - 0.5);
    const double v2 = 0.86 * es.normal();
    u2(i) = es.exponential(5.0) - 5.0;
    e(i) = rho * u2(i) + mix * (phi * v1 + 0.86 * v2);
    scale(i) = std::sqrt(1.0 + z1(i) * z1(i));
    if (K == 1) {
      Z(i, 0) = z1(i) * (zs.bernoulli() ? 1.0 : 0.0);
    } else {
      double power = z1(i);
      for (int p = 0; p < 5; ++p) {
        Z(i, p) = power;
        power *= z1(i);
      }
      for (Eigen::Index k = 5; k < K; ++k)
        Z(i, k) = z1(i) * (zs.bernoulli() ? 1.0 : 0.0);
    }
  }

  const VectorXd pi = VectorXd::Constant(K, pi_scale);
  RawSample raw;
  raw.Z = Z;
  raw.X = Z * pi + u2;
  raw.W = MatrixXd::Ones(n, 1);
  raw.Y = spec.beta * raw.X + raw.W.col(0) + scale.cwiseProduct(e);
  return raw;
}

inline RawSample generate(const DgpSpec& spec, std::uint64_t seed,
                          std::uint64_t replication = 0) {
  return spec.family == DgpFamily::DKM ? gen_dkm(spec, seed, replication)
                                       : gen_hausman(spec, seed, replication);
}

// Deterministic chunked parallel loop; body(i) writes only slot i.
inline void parallel_for(Eigen::Index total, Eigen::Index threads,
                         const std::function<void(Eigen::Index)>& body) {
  if (threads <= 0)
    threads = static_cast<Eigen::Index>(std::thread::hardware_concurrency());
  threads = std::max<Eigen::Index>(1, std::min(threads, total));
  if (threads == 1) {
    for (Eigen::Index i = 0; i < total; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (Eigen::Index t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (Eigen::Index i = t; i < total; i += threads) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

namespace detail {

struct RepOutcome {
  bool reject = false;
  bool failed = false;
  double regularizer = std::numeric_limits<double>::quiet_NaN();
};

inline RepOutcome run_one(Method m, const PartialledSample& ps,
                          const Hypothesis& h, const MonteCarloConfig& mc,
                          std::uint64_t boot_seed) {
  RepOutcome out;
  try {
    TestResult res;
    switch (m) {
      case Method::BS: {
        BootstrapConfig cfg{mc.bootstrap_draws, mc.alpha, WeightLaw::Rademacher,
                            boot_seed};
        try {
          res = bs_test(ps, h, cfg);
        } catch (const DegenerateInstruments&) {
          // No admissible penalty: force lambda = 0 and record it as such.
          BsOptions opts;
          opts.lambda_override = 0.0;
          res = bs_test(ps, h, cfg, opts);
          res.meta["feasible"] = 0.0;
          res.meta["lambda"] = 0.0;
        }
        out.regularizer = res.meta.at("lambda");
        break;
      }
      case Method::JARstd:
        res = jar_std(ps, h, mc.alpha);
        break;
      case Method::JARcf:
        res = jar_cf(ps, h, mc.alpha);
        break;
      case Method::AR:
        res = classical_ar(ps, h, mc.alpha);
        break;
      case Method::RJAR:
        res = rjar(ps, h, mc.alpha);
        out.regularizer = res.meta.at("gamma_star");
        break;
      case Method::BCCH:
        res = sup_score_bcch(ps, h, mc.alpha);
        break;
      case Method::CT:
        res = ct_test(ps, h, mc.alpha, mc.bootstrap_draws, boot_seed);
        break;
    }
    out.reject = res.reject;
  } catch (const Error&) {
    out.failed = true;
  }
  return out;
}

}  // namespace detail

// Rejection rates at a single (beta, beta0).  Used for both the size tables
// (beta0 == beta) and individual power-curve points.
inline std::vector<RejectionRow> run_point(const DgpSpec& spec,
                                           const MonteCarloConfig& mc) {
  const std::vector<Method> methods(mc.tests.begin(), mc.tests.end());
  const auto R = static_cast<std::size_t>(mc.replications);
  std::vector<std::vector<detail::RepOutcome>> outcomes(
      methods.size(), std::vector<detail::RepOutcome>(R));

  parallel_for(mc.replications, mc.threads, [&](Eigen::Index r) {
    const RawSample raw =
        generate(spec, mc.master_seed, static_cast<std::uint64_t>(r));
    const PartialledSample ps = standardize_instruments(partial_out(raw));
    const Hypothesis h{spec.beta0};
    const std::uint64_t boot_seed =
        mix_seed(mc.master_seed, stream_role::kBootstrapSeed +
                                     (static_cast<std::uint64_t>(r) << 8));
    for (std::size_t m = 0; m < methods.size(); ++m)
      outcomes[m][static_cast<std::size_t>(r)] =
          detail::run_one(methods[m], ps, h, mc, boot_seed);
  });

  std::vector<RejectionRow> rows;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    RejectionRow row;
    row.method = methods[m];
    row.K = spec.K;
    row.beta = spec.beta;
    Eigen::Index rejections = 0;
    double reg_sum = 0.0;
    Eigen::Index reg_count = 0;
    for (const auto& o : outcomes[m]) {
      if (o.failed) ++row.failures;
      if (o.reject) ++rejections;
      if (!std::isnan(o.regularizer)) {
        reg_sum += o.regularizer;
        ++reg_count;
      }
    }
    const auto R_d = static_cast<double>(mc.replications);
    row.rejection_rate = static_cast<double>(rejections) / R_d;
    row.mc_std_error =
        std::sqrt(row.rejection_rate * (1.0 - row.rejection_rate) / R_d);
    if (reg_count > 0) row.mean_regularizer = reg_sum / static_cast<double>(reg_count);
    rows.push_back(row);
  }
  return rows;
}

inline RejectionTable run_size_experiment(const DgpSpec& spec,
                                          const MonteCarloConfig& mc) {
  DgpSpec null_spec = spec;
  null_spec.beta0 = spec.beta;
  RejectionTable table;
  table.replications = mc.replications;
  table.rows = run_point(null_spec, mc);
  return table;
}

// One rejection rate per grid beta per test; data are generated at the grid
// beta while the hypothesis stays at spec.beta0 (common random numbers
// across grid points).
inline RejectionTable run_power_curve(const DgpSpec& spec,
                                      const MonteCarloConfig& mc) {
  RejectionTable table;
  table.replications = mc.replications;
  for (double beta : mc.beta_grid) {
    DgpSpec point = spec;
    point.beta = beta;
    auto rows = run_point(point, mc);
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  }
  return table;
}

}  // namespace arboot
