#pragma once

// Command-line front end. Four subcommands:
//   simulate   particle ensemble on one benchmark, JSON/CSV out
//   reference  grid solve of the stationary density and cell problem
//   converge   time-step sweep against an Eulerian reference, slope fit
//   compare    ensemble vs Eulerian with an entrywise tolerance gate
//
// Exit codes: 0 success, 1 bad usage or bad configuration, 2 numerical
// failure (solver breakdown, ensemble blow-up, or a compare gate missed).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "effdiff/montecarlo.hpp"

namespace effdiff {

struct RunConfig {
  std::string command;  // simulate | reference | converge | compare
  std::string problem = "benchmark-2d-constant";
  nlohmann::json problem_spec;  // inline coefficient spec; overrides problem
  std::optional<Eigen::VectorXd> drift_shift;

  // ensemble
  long long M = 200000;
  double T = 50.0;
  double h = 0.01;
  std::string scheme = "modified-milstein";
  std::uint64_t seed = 0;
  int workers = 0;
  int histogram_bins = 0;
  double burn_in_fraction = 0.10;
  int fl_order = 2;

  // grid
  int n = 128;
  double tol_lin = 1e-10;

  // converge
  std::vector<double> h_list;
  int reference_n = 256;

  // compare
  double tol_abs = 0.0;
  double tol_rel = 0.02;     // fraction of the Frobenius norm of the reference
  double stderr_factor = 4.0;

  std::string output;        // path; empty means stdout
  std::string format = "json";  // json | csv
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

// Merges a JSON config file (optional) with flag overrides; rejects unknown
// keys in the file with ConfigError. h_list must be strictly decreasing.
RunConfig parse_cli(int argc, const char* const* argv);

// Resolves the named benchmark or the inline spec, then applies drift_shift.
ProblemPtr problem_from_config(const RunConfig& config);

void apply_config_json(RunConfig& config, const nlohmann::json& j);
void validate_config(const RunConfig& config);

int run_simulate(const RunConfig& config, std::string& out_text);
int run_reference(const RunConfig& config, std::string& out_text);
int run_converge(const RunConfig& config, std::string& out_text);
int run_compare(const RunConfig& config, std::string& out_text);

// Full entry point used by the installed binary and by tests; catches
// everything and maps it to the exit-code contract.
int cli_main(int argc, const char* const* argv);

}  // namespace effdiff
