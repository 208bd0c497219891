#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "arboot/csv.hpp"
#include "arboot/simulation.hpp"

using namespace arboot;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

CmdResult run_cmd(const std::string& args) {
  const std::string cmd = std::string(ARBOOT_CLI_PATH) + " " + args + " 2>&1";
  CmdResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    res.out.append(buf.data(), got);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "arboot_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string write_dkm_csv(const std::string& name, std::uint64_t seed) {
  DgpSpec spec;
  spec.family = DgpFamily::DKM;
  spec.n = 120;
  spec.K = 5;
  spec.first_stage = FirstStage::Sparse;
  spec.mu2 = 100.0;
  spec.beta = 1.0;
  const std::string path = (scratch_dir() / name).string();
  write_raw_sample_csv(generate(spec, seed, 0), path);
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const std::string kRoles =
    "--outcome y --endogenous x --controls w0 --instruments prefix:z";

}  // namespace

TEST_CASE("csv round trip preserves every matrix") {
  DgpSpec spec;
  spec.family = DgpFamily::Hausman;
  spec.n = 60;
  spec.K = 10;
  const RawSample raw = generate(spec, 5, 0);
  const std::string path = (scratch_dir() / "roundtrip.csv").string();
  write_raw_sample_csv(raw, path);

  ColumnRoles roles;
  roles.outcome = "y";
  roles.endogenous = "x";
  roles.controls = {"w0"};
  roles.instruments = {"prefix:z"};
  const RawSample back = ingest_csv(path, roles);
  REQUIRE(back.Y.size() == 60);
  REQUIRE(back.Z.cols() == 10);
  REQUIRE(back.W.cols() == 1);
  REQUIRE((back.Y - raw.Y).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((back.X - raw.X).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((back.Z - raw.Z).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((back.W - raw.W).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ingest reports missing columns and bad cells") {
  const std::string path = (scratch_dir() / "bad.csv").string();
  {
    std::ofstream out(path);
    out << "y,x,z0\n1.0,2.0,3.0\n";
  }
  ColumnRoles roles;
  roles.outcome = "y";
  roles.endogenous = "x";
  roles.instruments = {"znope"};
  REQUIRE_THROWS_AS(ingest_csv(path, roles), MissingColumn);

  {
    std::ofstream out(path);
    out << "y,x,z0\n1.0,oops,3.0\n";
  }
  roles.instruments = {"z0"};
  REQUIRE_THROWS_AS(ingest_csv(path, roles), ParseError);

  {
    std::ofstream out(path);
    out << "y,x,z0\n1.0,inf,3.0\n";
  }
  REQUIRE_THROWS_AS(ingest_csv(path, roles), NonFinite);
}

TEST_CASE("test subcommand emits a complete result document") {
  const std::string data = write_dkm_csv("shape.csv", 31);
  const auto res = run_cmd("test --data " + data + " " + kRoles +
                           " --beta0 1.0 --draws 300 --seed 9");
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("\"schema_version\": 1") != std::string::npos);
  REQUIRE(res.out.find("\"command\": \"test\"") != std::string::npos);
  REQUIRE(res.out.find("\"statistic\":") != std::string::npos);
  REQUIRE(res.out.find("\"critical_value\":") != std::string::npos);
  REQUIRE(res.out.find("\"reject\":") != std::string::npos);
  REQUIRE(res.out.find("\"lambda\":") != std::string::npos);
  REQUIRE(res.out.find("\"p_n\":") != std::string::npos);
}

TEST_CASE("missing column surfaces as a runtime error with exit 1") {
  const std::string data = write_dkm_csv("missing.csv", 32);
  const auto res = run_cmd("test --data " + data +
                           " --outcome nope --endogenous x --instruments "
                           "prefix:z --beta0 1.0");
  REQUIRE(res.exit_code == 1);
  REQUIRE(res.out.find("\"error\":\"runtime\"") != std::string::npos);
  REQUIRE(res.out.find("nope") != std::string::npos);
}

TEST_CASE("unknown method is a usage error with exit 2") {
  const std::string data = write_dkm_csv("method.csv", 33);
  const auto res = run_cmd("test --data " + data + " " + kRoles +
                           " --beta0 1.0 --method bogus");
  REQUIRE(res.exit_code == 2);
}

TEST_CASE("identical seeds give byte-identical output") {
  const std::string data = write_dkm_csv("det.csv", 34);
  const std::string cmd = "test --data " + data + " " + kRoles +
                          " --beta0 1.0 --draws 400 --seed 17";
  const auto a = run_cmd(cmd);
  const auto b = run_cmd(cmd);
  REQUIRE(a.exit_code == 0);
  REQUIRE(a.out == b.out);
  const auto c = run_cmd("test --data " + data + " " + kRoles +
                         " --beta0 1.0 --draws 400 --seed 18");
  REQUIRE(c.out != a.out);
}

TEST_CASE("ci subcommand reports intervals and the empty set") {
  // X identically zero and Y proportional to the instrument: every
  // hypothesis leaves residuals perfectly aligned with Z, so the classical
  // test rejects the whole grid.
  const fs::path dir = scratch_dir();
  const std::string always = (dir / "always_reject.csv").string();
  {
    std::ofstream out(always);
    out << "y,x,z0\n";
    PhiloxStream s(3, 0, 0);
    for (int i = 0; i < 50; ++i) {
      const double z = s.normal();
      out << 10.0 * z << ",0.0," << z << "\n";
    }
  }
  const std::string base = " --outcome y --endogenous x --instruments z0";
  const auto rej = run_cmd("ci --data " + always + base +
                           " --method ar --grid-lo -1 --grid-hi 1 "
                           "--grid-points 5");
  REQUIRE(rej.exit_code == 0);
  REQUIRE(rej.out.find("\"empty\": true") != std::string::npos);
  REQUIRE(rej.out.find("\"intervals\": []") != std::string::npos);

  // Y and X both orthogonal to Z: the score is zero at every hypothesis and
  // a two-point grid compacts to the single interval [lo, hi].
  const std::string accept = (dir / "always_accept.csv").string();
  {
    std::ofstream out(accept);
    out << "y,x,z0\n";
    // z = (1,1,-1,-1), y and x constant-free patterns orthogonal to z
    const double z[4] = {1.0, 1.0, -1.0, -1.0};
    const double y[4] = {1.0, -1.0, 1.0, -1.0};
    const double x[4] = {0.5, -0.5, -0.5, 0.5};
    for (int i = 0; i < 4; ++i)
      out << y[i] << "," << x[i] << "," << z[i] << "\n";
  }
  const auto acc = run_cmd("ci --data " + accept + base +
                           " --method ar --grid-lo -2 --grid-hi 2 "
                           "--grid-points 2");
  REQUIRE(acc.exit_code == 0);
  REQUIRE(acc.out.find("\"empty\": false") != std::string::npos);
  REQUIRE(acc.out.find("[\n      -2.0,\n      2.0\n    ]") != std::string::npos);
}

TEST_CASE("simulate is deterministic byte-for-byte") {
  const fs::path dir = scratch_dir();
  const std::string flags =
      "simulate --family dkm --k 5 --mu2 30 --null --replications 40 "
      "--draws 100 --seed 6 --methods bs,jar_std --threads 2 --out ";
  const auto a = run_cmd(flags + (dir / "sa").string());
  const auto b = run_cmd(flags + (dir / "sb").string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  REQUIRE(read_file((dir / "sa.csv").string()) ==
          read_file((dir / "sb.csv").string()));
  REQUIRE(read_file((dir / "sa.json").string()) ==
          read_file((dir / "sb.json").string()));
  REQUIRE(a.out == b.out);
}

TEST_CASE("a single replication yields a zero-one rejection table") {
  const fs::path dir = scratch_dir();
  const auto res = run_cmd(
      "simulate --family dkm --k 1 --mu2 30 --null --replications 1 "
      "--draws 100 --seed 8 --methods bs --out " +
      (dir / "one").string());
  REQUIRE(res.exit_code == 0);
  const std::string csv = read_file((dir / "one.csv").string());
  const bool zero = csv.find("\nbs,1,1,0,") != std::string::npos;
  const bool one = csv.find("\nbs,1,1,1,") != std::string::npos;
  REQUIRE((zero || one));
}

TEST_CASE("select-lambda reports the audit grid") {
  const std::string data = write_dkm_csv("sel.csv", 35);
  const auto res = run_cmd("select-lambda --data " + data + " " + kRoles);
  REQUIRE(res.exit_code == 0);
  REQUIRE(res.out.find("\"feasible\": true") != std::string::npos);
  REQUIRE(res.out.find("\"lambda\":") != std::string::npos);
  REQUIRE(res.out.find("\"theta_bar\":") != std::string::npos);
  REQUIRE(res.out.find("\"q_criterion\":") != std::string::npos);
}
