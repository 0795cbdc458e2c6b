#include "effdiff/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "effdiff/errors.hpp"
#include "effdiff/eulerian.hpp"
#include "effdiff/jsonio.hpp"

namespace effdiff {

namespace {

using nlohmann::json;

struct ExitRequest {
  int code = 0;
};

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

long long as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("config key '" + key + "' must be an integer");
  return v.get<long long>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> as_number_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const json& e : v) out.push_back(as_double(e, key));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

SchemeKind scheme_or_config_error(const std::string& name) {
  try {
    return scheme_from_string(name);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

// Output path minus its final extension; aux artifacts hang off this stem.
std::string stem_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return path;
  if (slash != std::string::npos && dot < slash) return path;
  return path.substr(0, dot);
}

TrigTerm::Factor factor_from_json(const json& jf, const std::string& path, int dim) {
  if (!jf.is_object()) throw ConfigError(path + " must be an object");
  TrigTerm::Factor fac;
  bool have_axis = false, have_k = false;
  for (const auto& item : jf.items()) {
    if (item.key() == "axis") {
      fac.axis = static_cast<int>(as_int(item.value(), path + ".axis"));
      have_axis = true;
    } else if (item.key() == "k") {
      fac.k = static_cast<int>(as_int(item.value(), path + ".k"));
      have_k = true;
    } else if (item.key() == "trig") {
      const std::string t = as_string(item.value(), path + ".trig");
      if (t == "sin")
        fac.cosine = false;
      else if (t == "cos")
        fac.cosine = true;
      else
        throw ConfigError(path + ".trig must be \"sin\" or \"cos\"");
    } else {
      throw ConfigError("unknown config key '" + path + "." + item.key() + "'");
    }
  }
  if (!have_axis || !have_k) throw ConfigError(path + " needs 'axis' and 'k'");
  if (fac.axis < 0 || fac.axis >= dim) throw ConfigError(path + ".axis is out of range");
  if (fac.k < 0) throw ConfigError(path + ".k must be nonnegative");
  return fac;
}

TrigPoly poly_from_json(const json& ja, const std::string& path, int dim) {
  if (!ja.is_array()) throw ConfigError(path + " must be an array of terms");
  TrigPoly poly;
  for (size_t t = 0; t < ja.size(); ++t) {
    const std::string tp = path + "[" + std::to_string(t) + "]";
    const json& jt = ja[t];
    if (!jt.is_object()) throw ConfigError(tp + " must be an object");
    TrigTerm term;
    bool have_c = false;
    for (const auto& item : jt.items()) {
      if (item.key() == "c") {
        term.c = as_double(item.value(), tp + ".c");
        have_c = true;
      } else if (item.key() == "factors") {
        const json& jf = item.value();
        if (!jf.is_array()) throw ConfigError(tp + ".factors must be an array");
        for (size_t q = 0; q < jf.size(); ++q)
          term.factors.push_back(factor_from_json(
              jf[q], tp + ".factors[" + std::to_string(q) + "]", dim));
      } else {
        throw ConfigError("unknown config key '" + tp + "." + item.key() + "'");
      }
    }
    if (!have_c) throw ConfigError(tp + " needs the coefficient 'c'");
    poly.push_back(std::move(term));
  }
  return poly;
}

ProblemPtr trigpoly_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("problem_spec must be an object");
  int dim = 0;
  const json* jdrift = nullptr;
  const json* jsigma = nullptr;
  std::string name = "inline";
  for (const auto& item : j.items()) {
    if (item.key() == "dim")
      dim = static_cast<int>(as_int(item.value(), "problem_spec.dim"));
    else if (item.key() == "drift")
      jdrift = &item.value();
    else if (item.key() == "sigma")
      jsigma = &item.value();
    else if (item.key() == "name")
      name = as_string(item.value(), "problem_spec.name");
    else
      throw ConfigError("unknown config key 'problem_spec." + item.key() + "'");
  }
  if (dim < 1) throw ConfigError("problem_spec.dim must be a positive integer");
  if (!jdrift || !jsigma) throw ConfigError("problem_spec needs 'drift' and 'sigma'");
  if (!jdrift->is_array() || static_cast<int>(jdrift->size()) != dim)
    throw ConfigError("problem_spec.drift must be an array of dim polynomials");
  if (!jsigma->is_array() || static_cast<int>(jsigma->size()) != dim)
    throw ConfigError("problem_spec.sigma must be a dim x dim array of polynomials");

  std::vector<TrigPoly> drift;
  for (int i = 0; i < dim; ++i)
    drift.push_back(
        poly_from_json((*jdrift)[i], "problem_spec.drift[" + std::to_string(i) + "]", dim));
  std::vector<std::vector<TrigPoly>> sigma;
  for (int i = 0; i < dim; ++i) {
    const json& row = (*jsigma)[i];
    const std::string rp = "problem_spec.sigma[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ConfigError(rp + " must be an array of dim polynomials");
    std::vector<TrigPoly> srow;
    for (int k = 0; k < dim; ++k)
      srow.push_back(poly_from_json(row[k], rp + "[" + std::to_string(k) + "]", dim));
    sigma.push_back(std::move(srow));
  }
  try {
    return make_trigpoly_problem(dim, std::move(drift), std::move(sigma), std::move(name));
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("problem_spec: ") + e.what());
  }
}

EnsembleConfig ensemble_from(const RunConfig& cfg, bool with_histogram) {
  EnsembleConfig ec;
  ec.M = cfg.M;
  ec.T = cfg.T;
  ec.seed = cfg.seed;
  ec.histogram_bins = with_histogram ? cfg.histogram_bins : 0;
  ec.burn_in_fraction = cfg.burn_in_fraction;
  // converge carries a comma list; the study loop resets the kind per scheme.
  ec.scheme.kind = scheme_or_config_error(split_list(cfg.scheme).front());
  ec.scheme.h = cfg.h;
  ec.scheme.fl_order = cfg.fl_order;
  return ec;
}

ExecutionPolicy exec_from(const RunConfig& cfg) {
  ExecutionPolicy ex;
  ex.workers = cfg.workers;
  return ex;
}

// Resolved settings echoed into every output so a data file regenerates its
// own run; run-derived values (T_adjusted, steps) are appended by the caller.
json config_stamp(const RunConfig& cfg) {
  json s;
  if (!cfg.problem_spec.is_null())
    s["problem_spec"] = cfg.problem_spec;
  else
    s["problem"] = cfg.problem;
  if (cfg.drift_shift) s["drift_shift"] = vector_to_json(*cfg.drift_shift);
  const bool ensemble = cfg.command != "reference";
  if (ensemble) {
    s["M"] = cfg.M;
    s["T"] = cfg.T;
    s["seed"] = cfg.seed;
    s["workers"] = cfg.workers;
    s["burn_in_fraction"] = cfg.burn_in_fraction;
    s["fl_order"] = cfg.fl_order;
    if (cfg.command == "converge") {
      json schemes = json::array();
      for (const std::string& name : split_list(cfg.scheme))
        schemes.push_back(to_string(scheme_or_config_error(name)));
      s["schemes"] = std::move(schemes);
      s["h_list"] = json(cfg.h_list);
    } else {
      s["scheme"] = to_string(scheme_or_config_error(cfg.scheme));
      s["h"] = cfg.h;
    }
    if (cfg.command == "simulate") s["histogram_bins"] = cfg.histogram_bins;
  }
  if (cfg.command != "simulate") {
    s["tol_lin"] = cfg.tol_lin;
    if (cfg.command == "converge")
      s["reference_n"] = cfg.reference_n;
    else
      s["n"] = cfg.n;
  }
  if (cfg.command == "compare") {
    s["tol_abs"] = cfg.tol_abs;
    s["tol_rel"] = cfg.tol_rel;
    s["stderr_factor"] = cfg.stderr_factor;
  }
  return s;
}

std::vector<std::string> corrector_names(int d) {
  std::vector<std::string> names;
  for (int i = 0; i < d; ++i) names.push_back("chi_" + std::to_string(i));
  return names;
}

}  // namespace

void apply_config_json(RunConfig& config, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    const json& v = item.value();
    if (key == "problem")
      config.problem = as_string(v, key);
    else if (key == "problem_spec")
      config.problem_spec = v;
    else if (key == "drift_shift") {
      const std::vector<double> c = as_number_list(v, key);
      config.drift_shift =
          Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    } else if (key == "M")
      config.M = as_int(v, key);
    else if (key == "T")
      config.T = as_double(v, key);
    else if (key == "h")
      config.h = as_double(v, key);
    else if (key == "scheme")
      config.scheme = as_string(v, key);
    else if (key == "seed") {
      if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("config key 'seed' must be an integer");
      config.seed = v.get<std::uint64_t>();
    } else if (key == "workers")
      config.workers = static_cast<int>(as_int(v, key));
    else if (key == "histogram_bins")
      config.histogram_bins = static_cast<int>(as_int(v, key));
    else if (key == "burn_in_fraction")
      config.burn_in_fraction = as_double(v, key);
    else if (key == "fl_order")
      config.fl_order = static_cast<int>(as_int(v, key));
    else if (key == "n")
      config.n = static_cast<int>(as_int(v, key));
    else if (key == "tol_lin")
      config.tol_lin = as_double(v, key);
    else if (key == "h_list")
      config.h_list = as_number_list(v, key);
    else if (key == "reference_n")
      config.reference_n = static_cast<int>(as_int(v, key));
    else if (key == "tol_abs")
      config.tol_abs = as_double(v, key);
    else if (key == "tol_rel")
      config.tol_rel = as_double(v, key);
    else if (key == "stderr_factor")
      config.stderr_factor = as_double(v, key);
    else if (key == "output")
      config.output = as_string(v, key);
    else if (key == "format")
      config.format = as_string(v, key);
    else
      throw ConfigError("unknown config key '" + key + "'");
  }
}

void validate_config(const RunConfig& config) {
  if (config.command != "simulate" && config.command != "reference" &&
      config.command != "converge" && config.command != "compare")
    throw ConfigError("command must be simulate, reference, converge, or compare");
  if (config.problem_spec.is_null() && config.problem.empty())
    throw ConfigError("a problem name or an inline problem_spec is required");
  if (config.M < 1) throw ConfigError("M must be at least 1");
  if (!(config.T > 0)) throw ConfigError("T must be positive");
  if (!(config.h > 0)) throw ConfigError("h must be positive");
  if (!(config.burn_in_fraction >= 0.0 && config.burn_in_fraction < 1.0))
    throw ConfigError("burn_in_fraction must lie in [0, 1)");
  if (config.fl_order < 1) throw ConfigError("fl_order must be at least 1");
  if (config.workers < 0) throw ConfigError("workers must be nonnegative");
  if (config.histogram_bins != 0 && config.histogram_bins < 2)
    throw ConfigError("histogram_bins must be 0 or at least 2");
  if (config.n < 16) throw ConfigError("n must be at least 16");
  if (!(config.tol_lin > 0)) throw ConfigError("tol_lin must be positive");
  if (config.command == "converge") {
    for (const std::string& name : split_list(config.scheme)) scheme_or_config_error(name);
    if (config.h_list.size() < 3)
      throw ConfigError("converge needs h_list with at least three steps");
    for (size_t i = 0; i < config.h_list.size(); ++i) {
      if (!(config.h_list[i] > 0)) throw ConfigError("h_list entries must be positive");
      if (i > 0 && !(config.h_list[i] < config.h_list[i - 1]))
        throw ConfigError("h_list must be strictly decreasing");
    }
    if (config.reference_n < 16) throw ConfigError("reference_n must be at least 16");
  } else {
    if (config.scheme.find(',') != std::string::npos)
      throw ConfigError("only converge accepts a scheme list");
    scheme_or_config_error(config.scheme);
  }
  if (config.command == "compare") {
    if (config.tol_abs < 0 || config.tol_rel < 0 || config.stderr_factor < 0)
      throw ConfigError("compare tolerances must be nonnegative");
  }
  if (config.format != "json" && config.format != "csv")
    throw ConfigError("format must be json or csv");
  if (config.format == "csv") {
    if (config.command == "compare")
      throw ConfigError("compare emits json only");
    if (config.command == "simulate" && config.histogram_bins == 0)
      throw ConfigError("csv output for simulate is the histogram; set histogram_bins");
  }
}

RunConfig parse_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Effective diffusivity of periodic diffusions: particle ensembles, "
      "grid references, and step-size studies"};
  app.name("effdiff");
  app.set_help_flag("--help", "print usage and exit");  // frees --h for the step size

  std::string command;
  app.add_option("command", command, "simulate | reference | converge | compare")
      ->required()
      ->check(CLI::IsMember({"simulate", "reference", "converge", "compare"}));

  std::string config_path;
  RunConfig f;
  std::vector<double> shift, hlist;
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--problem", f.problem, "benchmark problem name");
  app.add_option("--drift-shift", shift, "constant drift offset, comma separated")
      ->delimiter(',');
  app.add_option("--M", f.M, "number of particles");
  app.add_option("--T", f.T, "time horizon (rounded to a whole number of steps)");
  app.add_option("--h", f.h, "time step");
  app.add_option("--scheme", f.scheme,
                 "euler-maruyama | milstein | modified-milstein; converge takes a comma list");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--workers", f.workers, "worker threads, 0 = hardware concurrency");
  app.add_option("--histogram-bins", f.histogram_bins,
                 "occupation histogram bins per axis, 0 = off");
  app.add_option("--burn-in", f.burn_in_fraction,
                 "fraction of steps dropped before histogram sampling");
  app.add_option("--fl-order", f.fl_order, "series order for the area integrals");
  app.add_option("--n", f.n, "grid nodes per axis");
  app.add_option("--tol-lin", f.tol_lin, "linear solve backward-error tolerance");
  app.add_option("--h-list", hlist, "strictly decreasing steps for converge")->delimiter(',');
  app.add_option("--reference-n", f.reference_n, "grid for the converge reference");
  app.add_option("--tol-abs", f.tol_abs, "compare: absolute slack per entry");
  app.add_option("--tol-rel", f.tol_rel, "compare: slack as a fraction of ||A_eff||_F");
  app.add_option("--stderr-factor", f.stderr_factor, "compare: multiple of the std error");
  app.add_option("--output", f.output, "output path; stdout when omitted");
  app.add_option("--format", f.format, "json | csv")
      ->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::cout << app.help();
      throw ExitRequest{kExitOk};
    }
    throw ConfigError(e.what());
  }

  RunConfig cfg;
  cfg.command = command;
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + config_path + ": " + e.what());
    }
    apply_config_json(cfg, j);
  }

  const auto given = [&app](const std::string& name) { return app.count(name) > 0; };
  if (given("--problem")) cfg.problem = f.problem;
  if (given("--drift-shift"))
    cfg.drift_shift =
        Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
  if (given("--M")) cfg.M = f.M;
  if (given("--T")) cfg.T = f.T;
  if (given("--h")) cfg.h = f.h;
  if (given("--scheme")) cfg.scheme = f.scheme;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--workers")) cfg.workers = f.workers;
  if (given("--histogram-bins")) cfg.histogram_bins = f.histogram_bins;
  if (given("--burn-in")) cfg.burn_in_fraction = f.burn_in_fraction;
  if (given("--fl-order")) cfg.fl_order = f.fl_order;
  if (given("--n")) cfg.n = f.n;
  if (given("--tol-lin")) cfg.tol_lin = f.tol_lin;
  if (given("--h-list")) cfg.h_list = hlist;
  if (given("--reference-n")) cfg.reference_n = f.reference_n;
  if (given("--tol-abs")) cfg.tol_abs = f.tol_abs;
  if (given("--tol-rel")) cfg.tol_rel = f.tol_rel;
  if (given("--stderr-factor")) cfg.stderr_factor = f.stderr_factor;
  if (given("--output")) cfg.output = f.output;
  if (given("--format")) cfg.format = f.format;

  validate_config(cfg);
  return cfg;
}

ProblemPtr problem_from_config(const RunConfig& config) {
  ProblemPtr p;
  if (!config.problem_spec.is_null()) {
    p = trigpoly_from_json(config.problem_spec);
  } else {
    try {
      p = make_problem(config.problem);
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  }
  if (config.drift_shift) {
    try {
      p = shift_drift(std::move(p), *config.drift_shift);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("drift_shift: ") + e.what());
    }
  }
  return p;
}

int run_simulate(const RunConfig& config, std::string& out_text) {
  const ProblemPtr p = problem_from_config(config);
  const EnsembleResult res =
      simulate_ensemble(*p, ensemble_from(config, true), exec_from(config));

  json j;
  j["command"] = "simulate";
  json stamp = config_stamp(config);
  stamp["T_adjusted"] = res.T_adjusted;
  stamp["steps"] = res.steps;
  j["config"] = std::move(stamp);
  j["result"] = ensemble_result_to_json(res);

  std::string hist_csv;
  if (res.histogram) hist_csv = field_to_csv(*res.histogram, {"density"});
  if (!config.output.empty() && res.histogram) {
    const std::string path = stem_of(config.output) + ".histogram.csv";
    write_text_file(path, hist_csv);
    j["artifacts"] = {{"histogram_csv", path}};
  }
  out_text = config.format == "csv" ? hist_csv : dump_json(j);
  return kExitOk;
}

int run_reference(const RunConfig& config, std::string& out_text) {
  const ProblemPtr p = problem_from_config(config);
  const EulerianSolution sol = solve_reference(*p, config.n, config.tol_lin);

  json j;
  j["command"] = "reference";
  j["config"] = config_stamp(config);
  j["result"] = eulerian_solution_to_json(sol);

  if (!config.output.empty()) {
    const std::string stem = stem_of(config.output);
    const std::string density_path = stem + ".density.csv";
    const std::string corrector_path = stem + ".corrector.csv";
    const std::string aeff_path = stem + ".aeff.csv";
    write_text_file(density_path, field_to_csv(sol.r, {"r"}));
    write_text_file(corrector_path, field_to_csv(sol.chi, corrector_names(p->dim())));
    write_text_file(aeff_path, matrix_to_csv("a", sol.A_eff));
    j["artifacts"] = {{"density_csv", density_path},
                      {"corrector_csv", corrector_path},
                      {"aeff_csv", aeff_path}};
  }
  out_text = config.format == "csv" ? field_to_csv(sol.r, {"r"}) : dump_json(j);
  return kExitOk;
}

int run_converge(const RunConfig& config, std::string& out_text) {
  const ProblemPtr p = problem_from_config(config);
  const EulerianSolution ref = solve_reference(*p, config.reference_n, config.tol_lin);

  EnsembleConfig base = ensemble_from(config, false);
  json studies = json::array();
  std::string csv;
  for (const std::string& name : split_list(config.scheme)) {
    base.scheme.kind = scheme_or_config_error(name);
    const ConvergenceStudy study =
        convergence_study(*p, config.h_list, base, ref.A_eff, exec_from(config));
    json js = convergence_study_to_json(study);
    js["scheme"] = to_string(base.scheme.kind);
    studies.push_back(std::move(js));
    const std::string table = convergence_study_to_csv(study);
    if (csv.empty())
      csv = table;
    else
      csv += table.substr(table.find('\n') + 1);  // shared header row
  }

  json j;
  j["command"] = "converge";
  j["config"] = config_stamp(config);
  j["reference"] = {{"n", ref.n}, {"A_eff", matrix_to_json(ref.A_eff)}};
  j["studies"] = std::move(studies);

  if (!config.output.empty()) {
    const std::string path = stem_of(config.output) + ".points.csv";
    write_text_file(path, csv);
    j["artifacts"] = {{"points_csv", path}};
  }
  out_text = config.format == "csv" ? csv : dump_json(j);
  return kExitOk;
}

int run_compare(const RunConfig& config, std::string& out_text) {
  const ProblemPtr p = problem_from_config(config);
  const EnsembleResult lag =
      simulate_ensemble(*p, ensemble_from(config, false), exec_from(config));
  const EulerianSolution eul = solve_reference(*p, config.n, config.tol_lin);

  const Eigen::MatrixXd diff = (lag.diffusivity.matrix - eul.A_eff).cwiseAbs();
  Eigen::MatrixXd tol = config.stderr_factor * lag.diffusivity.std_error;
  tol.array() += config.tol_abs + config.tol_rel * eul.A_eff.norm();
  const bool pass = (diff.array() <= tol.array()).all();

  json entry_pass = json::array();
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < diff.cols(); ++k) row.push_back(diff(i, k) <= tol(i, k));
    entry_pass.push_back(std::move(row));
  }

  json j;
  j["command"] = "compare";
  json stamp = config_stamp(config);
  stamp["T_adjusted"] = lag.T_adjusted;
  stamp["steps"] = lag.steps;
  j["config"] = std::move(stamp);
  j["lagrangian"] = ensemble_result_to_json(lag);
  json je = eulerian_solution_to_json(eul);
  je.erase("density");  // grids belong to the reference command
  je.erase("corrector");
  j["eulerian"] = std::move(je);
  j["comparison"] = {{"diff", matrix_to_json(diff)},
                     {"tolerance", matrix_to_json(tol)},
                     {"entry_pass", std::move(entry_pass)},
                     {"pass", pass}};
  out_text = dump_json(j);
  return pass ? kExitOk : kExitNumerical;
}

int cli_main(int argc, const char* const* argv) {
  try {
    const RunConfig cfg = parse_cli(argc, argv);
    std::string out;
    int code = 0;
    if (cfg.command == "simulate")
      code = run_simulate(cfg, out);
    else if (cfg.command == "reference")
      code = run_reference(cfg, out);
    else if (cfg.command == "converge")
      code = run_converge(cfg, out);
    else
      code = run_compare(cfg, out);
    if (cfg.output.empty())
      std::cout << out;
    else
      write_text_file(cfg.output, out);
    return code;
  } catch (const ExitRequest& r) {
    return r.code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace effdiff
