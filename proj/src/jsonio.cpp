#include "effdiff/jsonio.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "effdiff/errors.hpp"
#include "effdiff/eulerian.hpp"
#include "effdiff/montecarlo.hpp"

namespace effdiff {

namespace {

using nlohmann::json;

void dump_value(const json& j, std::string& out, int indent, int depth);

void dump_indent(std::string& out, int indent, int depth) {
  out.append(static_cast<size_t>(indent) * depth, ' ');
}

void dump_container(const json& j, std::string& out, int indent, int depth) {
  const bool object = j.is_object();
  out.push_back(object ? '{' : '[');
  bool first = true;
  for (const auto& item : j.items()) {
    if (!first) out.push_back(',');
    first = false;
    out.push_back('\n');
    dump_indent(out, indent, depth + 1);
    if (object) {
      out += json(item.key()).dump();
      out += ": ";
    }
    dump_value(item.value(), out, indent, depth + 1);
  }
  if (!first) {
    out.push_back('\n');
    dump_indent(out, indent, depth);
  }
  out.push_back(object ? '}' : ']');
}

void dump_value(const json& j, std::string& out, int indent, int depth) {
  switch (j.type()) {
    case json::value_t::object:
    case json::value_t::array:
      dump_container(j, out, indent, depth);
      break;
    case json::value_t::number_float:
      out += format_sci(j.get<double>());
      break;
    default:
      // null, booleans, integers, strings: the default rendering is already
      // canonical and deterministic.
      out += j.dump();
      break;
  }
}

}  // namespace

std::string format_sci(double x) {
  if (!std::isfinite(x)) return "null";  // JSON has no non-finite literals
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

std::string dump_json(const nlohmann::json& j, int indent) {
  std::string out;
  dump_value(j, out, indent, 0);
  out.push_back('\n');
  return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

nlohmann::json ensemble_result_to_json(const EnsembleResult& result) {
  json j;
  j["diffusivity"] = {{"matrix", matrix_to_json(result.diffusivity.matrix)},
                      {"std_error", matrix_to_json(result.diffusivity.std_error)},
                      {"M", result.diffusivity.M},
                      {"T", result.diffusivity.T},
                      {"h", result.diffusivity.h}};
  j["mean_drift"] = vector_to_json(result.mean_drift);
  j["mean_drift_std_error"] = vector_to_json(result.mean_drift_std_error);
  j["failures"] = result.failures;
  j["steps"] = result.steps;
  j["T_adjusted"] = result.T_adjusted;
  if (result.histogram) {
    const TorusGridField& f = *result.histogram;
    json values = json::array();
    for (Eigen::Index k = 0; k < f.nodes(); ++k) values.push_back(f.values(k, 0));
    j["histogram"] = {{"dim", f.dim},
                      {"bins", f.n},
                      {"integral", f.integral()},
                      {"values", std::move(values)}};
  }
  return j;
}

nlohmann::json eulerian_solution_to_json(const EulerianSolution& solution) {
  json j;
  j["n"] = solution.n;
  j["A_eff"] = matrix_to_json(solution.A_eff);
  j["b_bar"] = vector_to_json(solution.b_bar);
  j["asymmetry"] = solution.asymmetry;
  j["density_residual"] = solution.density_residual;
  j["cell_residuals"] = vector_to_json(solution.cell_residuals);
  json r = json::array();
  for (Eigen::Index k = 0; k < solution.r.nodes(); ++k)
    r.push_back(solution.r.values(k, 0));
  j["density"] = std::move(r);
  json chi = json::array();
  for (int c = 0; c < solution.chi.components(); ++c) {
    json col = json::array();
    for (Eigen::Index k = 0; k < solution.chi.nodes(); ++k)
      col.push_back(solution.chi.values(k, c));
    chi.push_back(std::move(col));
  }
  j["corrector"] = std::move(chi);
  return j;
}

nlohmann::json convergence_study_to_json(const ConvergenceStudy& study) {
  json pts = json::array();
  for (const ConvergencePoint& p : study.points) {
    json e;
    e["h"] = p.h;
    e["scheme"] = to_string(p.scheme);
    e["err_entries"] = matrix_to_json(p.err_entries);
    e["std_error_entries"] = matrix_to_json(p.std_error_entries);
    e["err_frobenius"] = p.err_frobenius;
    e["std_error_frobenius"] = p.std_error_frobenius;
    e["wallclock_seconds"] = p.wallclock_seconds;
    e["excluded"] = p.excluded;
    e["estimate"] = {{"matrix", matrix_to_json(p.estimate.matrix)},
                     {"std_error", matrix_to_json(p.estimate.std_error)}};
    pts.push_back(std::move(e));
  }
  json j;
  j["points"] = std::move(pts);
  if (std::isfinite(study.slope_frobenius))
    j["slope_frobenius"] = study.slope_frobenius;
  else
    j["slope_frobenius"] = nullptr;  // fewer than two usable points
  j["points_used"] = study.points_used;
  return j;
}

std::string convergence_study_to_csv(const ConvergenceStudy& study) {
  std::string out = "h,scheme,err_frobenius";
  int d = 0;
  if (!study.points.empty()) d = static_cast<int>(study.points[0].err_entries.rows());
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k)
      out += ",err_" + std::to_string(i) + std::to_string(k);
  out += ",std_error_frobenius,wallclock_seconds,excluded\n";
  for (const ConvergencePoint& p : study.points) {
    out += format_sci(p.h);
    out += ',';
    out += to_string(p.scheme);
    out += ',';
    out += format_sci(p.err_frobenius);
    for (int i = 0; i < d; ++i)
      for (int k = 0; k < d; ++k) {
        out += ',';
        out += format_sci(p.err_entries(i, k));
      }
    out += ',';
    out += format_sci(p.std_error_frobenius);
    out += ',';
    out += format_sci(p.wallclock_seconds);
    out += ',';
    out += p.excluded ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string matrix_to_csv(const std::string& prefix, const Eigen::MatrixXd& m) {
  std::string header, row;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (!header.empty()) {
        header += ',';
        row += ',';
      }
      header += prefix + "_" + std::to_string(i) + std::to_string(k);
      row += format_sci(m(i, k));
    }
  return header + "\n" + row + "\n";
}

std::string field_to_csv(const TorusGridField& field,
                         const std::vector<std::string>& value_names) {
  if (static_cast<int>(value_names.size()) != field.components())
    throw ArgumentError("field_to_csv needs one column name per component");
  std::string out;
  for (int a = 0; a < field.dim; ++a) {
    if (a) out += ',';
    out += "y_" + std::to_string(a);
  }
  for (const std::string& name : value_names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (Eigen::Index k = 0; k < field.nodes(); ++k) {
    const Eigen::VectorXd y = field.node_point(k);
    for (int a = 0; a < field.dim; ++a) {
      if (a) out += ',';
      out += format_sci(y[a]);
    }
    for (int c = 0; c < field.components(); ++c) {
      out += ',';
      out += format_sci(field.values(k, c));
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << content;
  out.flush();
  if (!out) throw ConfigError("write failed: " + path);
}

}  // namespace effdiff
