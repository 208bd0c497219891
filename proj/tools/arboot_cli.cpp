// Command-line surface: CSV ingestion, single-hypothesis tests, confidence
// sets by test inversion, regularizer inspection, and Monte Carlo runs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "arboot/ar_test.hpp"
#include "arboot/competitors.hpp"
#include "arboot/csv.hpp"
#include "arboot/inversion.hpp"
#include "arboot/projection.hpp"
#include "arboot/simulation.hpp"

using json = nlohmann::ordered_json;
using namespace arboot;

namespace {

constexpr int kSchemaVersion = 1;

const std::vector<std::string> kMethodNames = {"bs",   "jar_std", "jar_cf", "ar",
                                               "rjar", "bcch",    "ct"};

Method parse_method(const std::string& name) {
  for (int m = 0; m < 7; ++m)
    if (name == method_name(static_cast<Method>(m))) return static_cast<Method>(m);
  throw CLI::ValidationError("--method", "unknown method '" + name + "'");
}

struct DataFlags {
  std::string path;
  ColumnRoles roles;
  std::vector<std::string> controls_csv;
  std::vector<std::string> instruments_csv;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--data", d.path, "CSV file with a header row")->required();
  cmd->add_option("--outcome", d.roles.outcome, "outcome column")->required();
  cmd->add_option("--endogenous", d.roles.endogenous, "endogenous column")
      ->required();
  cmd->add_option("--controls", d.controls_csv,
                  "control columns (comma separated)")
      ->delimiter(',');
  cmd->add_option("--instruments", d.instruments_csv,
                  "instrument columns, or prefix:<p> to match by prefix")
      ->required()
      ->delimiter(',');
  cmd->add_flag("--intercept", d.roles.add_intercept,
                "append a constant control column");
}

PartialledSample load_sample(const DataFlags& d) {
  ColumnRoles roles = d.roles;
  roles.controls = d.controls_csv;
  roles.instruments = d.instruments_csv;
  return standardize_instruments(partial_out(ingest_csv(d.path, roles)));
}

TestResult run_method(Method m, const PartialledSample& ps, const Hypothesis& h,
                      double alpha, Eigen::Index draws, std::uint64_t seed) {
  switch (m) {
    case Method::BS:
      return bs_test(ps, h, {draws, alpha, WeightLaw::Rademacher, seed});
    case Method::JARstd:
      return jar_std(ps, h, alpha);
    case Method::JARcf:
      return jar_cf(ps, h, alpha);
    case Method::AR:
      return classical_ar(ps, h, alpha);
    case Method::RJAR:
      return rjar(ps, h, alpha);
    case Method::BCCH:
      return sup_score_bcch(ps, h, alpha);
    case Method::CT:
      return ct_test(ps, h, alpha, draws, seed);
  }
  throw Error("unreachable method");
}

json result_json(const TestResult& res) {
  json j;
  j["method"] = method_name(res.method);
  j["statistic"] = res.statistic;
  j["critical_value"] = res.critical_value;
  j["reject"] = res.reject;
  j["alpha"] = res.alpha;
  j["meta"] = json::object();
  for (const auto& [k, v] : res.meta) j["meta"][k] = v;
  return j;
}

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write '" + out_path + "'");
    out << text;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"bootstrap Anderson-Rubin testing for IV regression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file");
  app.get_config_formatter_base()->section("");

  // --- test ---
  auto* t = app.add_subcommand("test", "test a single hypothesized coefficient");
  DataFlags t_data;
  add_data_flags(t, t_data);
  double t_beta0 = 0.0, t_alpha = 0.05;
  std::string t_method = "bs", t_out;
  Eigen::Index t_draws = 2000;
  std::uint64_t t_seed = 0;
  t->add_option("--beta0", t_beta0, "hypothesized coefficient")->required();
  t->add_option("--method", t_method)->check(CLI::IsMember(kMethodNames));
  t->add_option("--alpha", t_alpha)->check(CLI::Range(1e-6, 1.0 - 1e-6));
  t->add_option("--draws", t_draws)->check(CLI::PositiveNumber);
  t->add_option("--seed", t_seed);
  t->add_option("--out", t_out, "write JSON here instead of stdout");

  // --- ci ---
  auto* c = app.add_subcommand("ci", "confidence set by test inversion");
  DataFlags c_data;
  add_data_flags(c, c_data);
  double c_alpha = 0.05, c_lo = 0.0, c_hi = 0.0;
  Eigen::Index c_points = 201, c_draws = 2000;
  std::string c_method = "bs", c_out;
  std::uint64_t c_seed = 0;
  c->add_option("--grid-lo", c_lo)->required();
  c->add_option("--grid-hi", c_hi)->required();
  c->add_option("--grid-points", c_points)->check(CLI::Range(2, 1000000));
  c->add_option("--method", c_method)->check(CLI::IsMember(kMethodNames));
  c->add_option("--alpha", c_alpha)->check(CLI::Range(1e-6, 1.0 - 1e-6));
  c->add_option("--draws", c_draws)->check(CLI::PositiveNumber);
  c->add_option("--seed", c_seed);
  c->add_option("--out", c_out);

  // --- select-lambda ---
  auto* s = app.add_subcommand("select-lambda",
                               "report the data-driven ridge penalty");
  DataFlags s_data;
  add_data_flags(s, s_data);
  std::string s_out;
  s->add_option("--out", s_out);

  // --- simulate ---
  auto* m = app.add_subcommand("simulate", "Monte Carlo size or power run");
  std::string m_family = "dkm", m_first = "sparse", m_methods = "bs", m_out;
  DgpSpec spec;
  MonteCarloConfig mc;
  bool m_null = false;
  std::vector<double> m_grid;
  m->add_option("--family", m_family)->check(CLI::IsMember({"dkm", "hausman"}));
  m->add_option("--n", spec.n)->check(CLI::PositiveNumber);
  m->add_option("--k", spec.K)->check(CLI::PositiveNumber);
  m->add_option("--mu2", spec.mu2)->check(CLI::NonNegativeNumber);
  m->add_option("--first-stage", m_first)->check(CLI::IsMember({"sparse", "dense"}));
  m->add_option("--beta", spec.beta);
  m->add_option("--beta0", spec.beta0);
  m->add_flag("--null", m_null, "test at the data-generating beta");
  m->add_option("--beta-grid", m_grid, "power-curve grid (comma separated)")
      ->delimiter(',');
  m->add_option("--replications", mc.replications)->check(CLI::PositiveNumber);
  m->add_option("--draws", mc.bootstrap_draws)->check(CLI::PositiveNumber);
  m->add_option("--alpha", mc.alpha)->check(CLI::Range(1e-6, 1.0 - 1e-6));
  m->add_option("--seed", mc.master_seed);
  m->add_option("--methods", m_methods, "comma-separated test list");
  m->add_option("--threads", mc.threads);
  m->add_option("--out", m_out, "output path stem (.csv and .json appended)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints message / help text
    return code == 0 ? 0 : 2;
  }

  if (t->parsed()) {
    const PartialledSample ps = load_sample(t_data);
    const TestResult res = run_method(parse_method(t_method), ps, {t_beta0},
                                      t_alpha, t_draws, t_seed);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "test";
    j["beta0"] = t_beta0;
    j["n"] = ps.n;
    j["k"] = ps.K;
    j["draws"] = t_draws;
    j["seed"] = t_seed;
    j["result"] = result_json(res);
    emit(j, t_out);
    return 0;
  }

  if (c->parsed()) {
    const PartialledSample ps = load_sample(c_data);
    const Method method = parse_method(c_method);
    const auto grid = linspace(c_lo, c_hi, c_points);
    const ConfidenceSet cs = invert_test(grid, [&](double beta0) {
      // The bootstrap weight streams depend only on (seed, draw), so every
      // grid point reuses identical weights.
      return run_method(method, ps, {beta0}, c_alpha, c_draws, c_seed);
    });
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "ci";
    j["method"] = c_method;
    j["alpha"] = c_alpha;
    j["grid_lo"] = c_lo;
    j["grid_hi"] = c_hi;
    j["grid_points"] = c_points;
    j["seed"] = c_seed;
    j["empty"] = cs.empty;
    j["intervals"] = json::array();
    for (const auto& [lo, hi] : cs.intervals) j["intervals"].push_back({lo, hi});
    Eigen::Index accepted = 0;
    for (bool a : cs.accepted) accepted += a ? 1 : 0;
    j["accepted_points"] = accepted;
    emit(j, c_out);
    return 0;
  }

  if (s->parsed()) {
    const PartialledSample ps = load_sample(s_data);
    const SvdFactors f = svd_factorize(ps.Z);
    const LambdaSelection sel = select_lambda(f, ps.n);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "select_lambda";
    j["n"] = ps.n;
    j["k"] = ps.K;
    j["theta_bar"] = sel.theta_bar;
    j["feasible"] = sel.feasible;
    if (sel.feasible) {
      j["lambda"] = *sel.lambda;
      const RidgeProjection P = ridge_projection_at(f, *sel.lambda);
      j["k_lambda"] = P.k_theta;
      j["p_n"] = P.p_n;
      j["q_n"] = P.q_n;
    }
    j["grid"] = json::array();
    for (const auto& g : sel.grid_evaluations)
      j["grid"].push_back({{"theta", g.theta},
                           {"q_criterion", g.q_criterion},
                           {"p_criterion", g.p_criterion},
                           {"k_theta", g.k_theta}});
    emit(j, s_out);
    return 0;
  }

  // simulate
  spec.family = (m_family == "dkm") ? DgpFamily::DKM : DgpFamily::Hausman;
  if (spec.family == DgpFamily::DKM)
    spec.first_stage =
        (m_first == "sparse") ? FirstStage::Sparse : FirstStage::Dense;
  else
    spec.first_stage = FirstStage::NotApplicable;
  if (m_null) spec.beta0 = spec.beta;
  mc.tests.clear();
  for (const auto& name : CLI::detail::split(m_methods, ','))
    mc.tests.insert(parse_method(name));
  if (mc.tests.empty())
    throw CLI::ValidationError("--methods", "no tests selected");
  mc.beta_grid = m_grid;

  const RejectionTable table = m_grid.empty() ? run_size_experiment(spec, mc)
                                              : run_power_curve(spec, mc);
  {
    std::ofstream csv(m_out + ".csv");
    if (!csv) throw Error("cannot write '" + m_out + ".csv'");
    csv << table.to_csv();
  }
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "simulate";
  j["family"] = m_family;
  j["n"] = spec.n;
  j["k"] = spec.K;
  j["replications"] = table.replications;
  j["draws"] = mc.bootstrap_draws;
  j["alpha"] = mc.alpha;
  j["seed"] = mc.master_seed;
  j["rows"] = json::array();
  for (const auto& r : table.rows) {
    json row;
    row["method"] = method_name(r.method);
    row["k"] = r.K;
    row["beta"] = r.beta;
    row["rejection_rate"] = r.rejection_rate;
    row["mc_se"] = r.mc_std_error;
    if (!std::isnan(r.mean_regularizer))
      row["mean_regularizer"] = r.mean_regularizer;
    row["failures"] = r.failures;
    j["rows"].push_back(row);
  }
  emit(j, m_out + ".json");

  std::printf("%-8s %5s %8s %10s %10s %9s\n", "method", "K", "beta", "reject",
              "mc_se", "failures");
  for (const auto& r : table.rows)
    std::printf("%-8s %5lld %8.4f %10.4f %10.4f %9lld\n", method_name(r.method),
                static_cast<long long>(r.K), r.beta, r.rejection_rate,
                r.mc_std_error, static_cast<long long>(r.failures));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ValidationError& e) {
    std::cerr << json{{"schema_version", kSchemaVersion},
                      {"error", "usage"},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"schema_version", kSchemaVersion},
                      {"error", "runtime"},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"schema_version", kSchemaVersion},
                      {"error", "internal"},
                      {"message", e.what()}}
                     .dump()
              << "\n";
    return 1;
  }
}
