#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <effdiff/cli.hpp>
#include <effdiff/errors.hpp>
#include <effdiff/eulerian.hpp>
#include <effdiff/jsonio.hpp>

using namespace effdiff;
using nlohmann::json;

namespace {

RunConfig parse(std::vector<std::string> args) {
  std::vector<const char*> argv = {"effdiff"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return parse_cli(static_cast<int>(argv.size()), argv.data());
}

int main_with(std::vector<std::string> args) {
  std::vector<const char*> argv = {"effdiff"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

// Temp files land in the test working directory and are removed on scope exit.
struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  std::string read() const {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  bool exists() const { return std::ifstream(path).good(); }
};

}  // namespace

TEST_CASE("flags parse into the run configuration") {
  const RunConfig cfg = parse({"simulate", "--problem", "benchmark-2d-variable",
                               "--M", "5000", "--T", "12.5", "--h", "0.02",
                               "--scheme", "milstein", "--seed", "42",
                               "--histogram-bins", "32", "--burn-in", "0.25",
                               "--workers", "3", "--fl-order", "4"});
  CHECK(cfg.command == "simulate");
  CHECK(cfg.problem == "benchmark-2d-variable");
  CHECK(cfg.M == 5000);
  CHECK(cfg.T == 12.5);
  CHECK(cfg.h == 0.02);
  CHECK(cfg.scheme == "milstein");
  CHECK(cfg.seed == 42);
  CHECK(cfg.histogram_bins == 32);
  CHECK(cfg.burn_in_fraction == 0.25);
  CHECK(cfg.workers == 3);
  CHECK(cfg.fl_order == 4);
  CHECK(!cfg.drift_shift.has_value());
}

TEST_CASE("defaults survive when flags are omitted") {
  const RunConfig cfg = parse({"reference"});
  CHECK(cfg.problem == "benchmark-2d-constant");
  CHECK(cfg.n == 128);
  CHECK(cfg.tol_lin == 1e-10);
  CHECK(cfg.scheme == "modified-milstein");
  CHECK(cfg.format == "json");
}

TEST_CASE("config file values apply and flags override them") {
  TempFile f("test_cli_cfg.json");
  f.write(R"({"problem": "free-brownian-2d", "M": 77, "T": 3.0, "seed": 9,
              "drift_shift": [0.25, -0.5], "h": 0.05})");
  const RunConfig cfg =
      parse({"simulate", "--config", f.path, "--M", "123"});
  CHECK(cfg.problem == "free-brownian-2d");
  CHECK(cfg.M == 123);  // flag wins
  CHECK(cfg.T == 3.0);  // file wins over default
  CHECK(cfg.seed == 9);
  REQUIRE(cfg.drift_shift.has_value());
  CHECK((*cfg.drift_shift)[0] == 0.25);
  CHECK((*cfg.drift_shift)[1] == -0.5);
}

TEST_CASE("bad configurations are rejected with ConfigError") {
  CHECK_THROWS_AS(parse({"simulate", "--M", "0"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--T", "0"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--h", "-0.1"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--burn-in", "1.0"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--histogram-bins", "1"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--scheme", "heun"}), ConfigError);
  CHECK_THROWS_AS(parse({"reference", "--n", "8"}), ConfigError);
  CHECK_THROWS_AS(parse({"reference", "--tol-lin", "0"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--no-such-flag", "1"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--format", "yaml"}), ConfigError);
  CHECK_THROWS_AS(parse({"compare", "--format", "csv"}), ConfigError);
  CHECK_THROWS_AS(parse({"simulate", "--format", "csv"}), ConfigError);
  // h_list rules: present, at least three entries, strictly decreasing.
  CHECK_THROWS_AS(parse({"converge"}), ConfigError);
  CHECK_THROWS_AS(parse({"converge", "--h-list", "0.1,0.05"}), ConfigError);
  CHECK_THROWS_AS(parse({"converge", "--h-list", "0.1,0.2,0.05"}), ConfigError);
  CHECK_THROWS_AS(parse({"converge", "--h-list", "0.1,0.1,0.05"}), ConfigError);
  CHECK_THROWS_AS(parse({"converge", "--h-list", "0.1,0.05,0"}), ConfigError);
  // Scheme lists are a converge-only convenience.
  CHECK_THROWS_AS(parse({"simulate", "--scheme", "euler-maruyama,milstein"}),
                  ConfigError);
  CHECK_NOTHROW(parse({"converge", "--h-list", "0.1,0.05,0.025", "--scheme",
                       "euler-maruyama,milstein"}));
}

TEST_CASE("unknown config file keys are rejected, not ignored") {
  TempFile f("test_cli_unknown.json");
  f.write(R"({"M": 100, "stepsize": 0.01})");
  try {
    parse({"simulate", "--config", f.path});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("stepsize") != std::string::npos);
  }

  TempFile g("test_cli_types.json");
  g.write(R"({"M": "many"})");
  CHECK_THROWS_AS(parse({"simulate", "--config", g.path}), ConfigError);

  TempFile h("test_cli_syntax.json");
  h.write("{not json");
  CHECK_THROWS_AS(parse({"simulate", "--config", h.path}), ConfigError);

  CHECK_THROWS_AS(parse({"simulate", "--config", "test_cli_absent.json"}),
                  ConfigError);
}

TEST_CASE("problems resolve from names, shifts, and inline specs") {
  RunConfig cfg = parse({"reference", "--problem", "benchmark-3d"});
  CHECK(problem_from_config(cfg)->dim() == 3);

  CHECK_THROWS_AS(
      problem_from_config(parse({"reference", "--problem", "mystery"})),
      ConfigError);

  // Shift dimension must match the problem.
  RunConfig bad = parse({"reference", "--drift-shift", "0.1,0.2,0.3"});
  CHECK_THROWS_AS(problem_from_config(bad), ConfigError);

  TempFile f("test_cli_inline.json");
  f.write(R"({"problem_spec": {"dim": 2, "name": "flat",
    "drift": [[], []],
    "sigma": [[[{"c": 1.4142135623730951}], []],
              [[], [{"c": 1.4142135623730951}]]]}})");
  RunConfig inl = parse({"reference", "--config", f.path, "--n", "16"});
  const ProblemPtr p = problem_from_config(inl);
  CHECK(p->dim() == 2);
  const EulerianSolution sol = solve_reference(*p, 16);
  CHECK(sol.A_eff(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sol.A_eff(0, 1) == doctest::Approx(0.0).epsilon(1e-12));

  TempFile g("test_cli_badspec.json");
  g.write(R"({"problem_spec": {"dim": 2, "drift": [[], []],
    "sigma": [[[{"c": 1.0, "factors": [{"axis": 5, "k": 1, "trig": "sin"}]}], []],
              [[], [{"c": 1.0}]]]}})");
  CHECK_THROWS_AS(problem_from_config(parse({"reference", "--config", g.path})),
                  ConfigError);
}

TEST_CASE("simulate output is deterministic and round-trips the estimate") {
  const RunConfig cfg = parse({"simulate", "--problem", "benchmark-2d-constant",
                               "--M", "512", "--T", "1", "--h", "0.05",
                               "--seed", "7", "--scheme", "euler-maruyama"});
  std::string out1, out2;
  CHECK(run_simulate(cfg, out1) == kExitOk);
  CHECK(run_simulate(cfg, out2) == kExitOk);
  CHECK(out1 == out2);  // byte identical

  const json j = json::parse(out1);
  CHECK(j["command"] == "simulate");
  CHECK(j["config"]["seed"].get<std::uint64_t>() == 7);
  CHECK(j["config"]["T_adjusted"].get<double>() == 1.0);
  CHECK(j["config"]["steps"].get<long long>() == 20);
  CHECK(j["config"]["scheme"] == "euler-maruyama");

  // The serialized matrix reconstructs the in-memory estimate bitwise.
  EnsembleConfig ec;
  ec.M = 512;
  ec.T = 1.0;
  ec.seed = 7;
  ec.scheme.kind = SchemeKind::euler_maruyama;
  ec.scheme.h = 0.05;
  const EnsembleResult direct =
      simulate_ensemble(*make_problem("benchmark-2d-constant"), ec);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) {
      CHECK(j["result"]["diffusivity"]["matrix"][i][k].get<double>() ==
            direct.diffusivity.matrix(i, k));
      CHECK(j["result"]["diffusivity"]["std_error"][i][k].get<double>() ==
            direct.diffusivity.std_error(i, k));
    }
  CHECK(j["result"]["failures"].get<long long>() == direct.failures);
}

TEST_CASE("reference command emits the solution and grid artifacts") {
  TempFile out("test_cli_ref.json");
  TempFile density("test_cli_ref.density.csv");
  TempFile corrector("test_cli_ref.corrector.csv");
  TempFile aeff("test_cli_ref.aeff.csv");
  CHECK(main_with({"reference", "--problem", "free-brownian-2d", "--n", "16",
                   "--output", out.path}) == kExitOk);
  REQUIRE(out.exists());
  const json j = json::parse(out.read());
  CHECK(j["result"]["n"].get<int>() == 16);
  CHECK(j["result"]["A_eff"][0][0].get<double>() == doctest::Approx(1.0));
  CHECK(j["result"]["density"].size() == 256);
  CHECK(j["artifacts"]["density_csv"] == density.path);

  REQUIRE(density.exists());
  const std::string csv = density.read();
  CHECK(csv.substr(0, csv.find('\n')) == "y_0,y_1,r");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 257);

  REQUIRE(corrector.exists());
  const std::string ccsv = corrector.read();
  CHECK(ccsv.substr(0, ccsv.find('\n')) == "y_0,y_1,chi_0,chi_1");

  REQUIRE(aeff.exists());
  CHECK(aeff.read().substr(0, 19) == "a_00,a_01,a_10,a_11");
}

TEST_CASE("converge command fits per-scheme slopes into one table") {
  const RunConfig cfg =
      parse({"converge", "--problem", "free-brownian-2d", "--M", "256", "--T",
             "1", "--seed", "5", "--scheme", "euler-maruyama,modified-milstein",
             "--h-list", "0.1,0.05,0.025", "--reference-n", "16"});
  std::string out;
  CHECK(run_converge(cfg, out) == kExitOk);
  const json j = json::parse(out);
  CHECK(j["studies"].size() == 2);
  CHECK(j["studies"][0]["scheme"] == "euler-maruyama");
  CHECK(j["studies"][1]["scheme"] == "modified-milstein");
  CHECK(j["studies"][0]["points"].size() == 3);
  CHECK(j["reference"]["n"].get<int>() == 16);
  CHECK(j["config"]["schemes"].size() == 2);
  CHECK(j["config"]["h_list"].size() == 3);

  // CSV rendering of the same run: one header plus one row per point.
  RunConfig csv_cfg = cfg;
  csv_cfg.format = "csv";
  std::string table;
  CHECK(run_converge(csv_cfg, table) == kExitOk);
  CHECK(std::count(table.begin(), table.end(), '\n') == 7);
  CHECK(table.substr(0, 2) == "h,");
  CHECK(table.find("modified-milstein") != std::string::npos);
}

TEST_CASE("compare command applies the entrywise gate") {
  const RunConfig cfg =
      parse({"compare", "--problem", "free-brownian-2d", "--M", "4096", "--T",
             "4", "--h", "0.05", "--seed", "11", "--n", "16"});
  std::string out;
  const int code = run_compare(cfg, out);
  const json j = json::parse(out);
  CHECK(j["comparison"]["pass"].is_boolean());
  CHECK(j["comparison"]["diff"].size() == 2);
  CHECK(!j.contains("density"));
  CHECK(!j["eulerian"].contains("density"));
  if (j["comparison"]["pass"].get<bool>())
    CHECK(code == kExitOk);
  else
    CHECK(code == kExitNumerical);

  // An impossible gate must fail with the numerical exit code.
  RunConfig strict = cfg;
  strict.stderr_factor = 0.0;
  strict.tol_rel = 0.0;
  strict.tol_abs = 0.0;
  std::string strict_out;
  CHECK(run_compare(strict, strict_out) == kExitNumerical);
  CHECK(json::parse(strict_out)["comparison"]["pass"].get<bool>() == false);
}

TEST_CASE("entry point maps failures to the exit-code contract") {
  CHECK(main_with({"--help"}) == kExitOk);
  CHECK(main_with({}) == kExitConfig);              // missing command
  CHECK(main_with({"simulate", "--M"}) == kExitConfig);  // flag needs a value
  CHECK(main_with({"simulate", "--problem", "nope"}) == kExitConfig);
  // Step size so large every trajectory overflows: numerical failure.
  CHECK(main_with({"simulate", "--problem", "benchmark-2d-constant", "--M", "8",
                   "--T", "1.7e308", "--h", "1e306"}) == kExitNumerical);
  // Unwritable output path is a configuration problem.
  CHECK(main_with({"reference", "--problem", "free-brownian-2d", "--n", "16",
                   "--output", "/no/such/dir/x.json"}) == kExitConfig);
}

TEST_CASE("histogram artifact accompanies the simulate output file") {
  TempFile out("test_cli_sim.json");
  TempFile hist("test_cli_sim.histogram.csv");
  CHECK(main_with({"simulate", "--problem", "free-brownian-2d", "--M", "64",
                   "--T", "1", "--h", "0.1", "--seed", "1", "--histogram-bins",
                   "4", "--output", out.path}) == kExitOk);
  REQUIRE(out.exists());
  REQUIRE(hist.exists());
  const json j = json::parse(out.read());
  CHECK(j["artifacts"]["histogram_csv"] == hist.path);
  CHECK(j["result"]["histogram"]["bins"].get<int>() == 4);
  CHECK(j["result"]["histogram"]["values"].size() == 16);
  const std::string csv = hist.read();
  CHECK(csv.substr(0, csv.find('\n')) == "y_0,y_1,density");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
}
