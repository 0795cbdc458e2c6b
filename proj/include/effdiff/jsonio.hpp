#pragma once

// Serialization helpers shared by the CLI and the test drivers. Numbers go
// out with 17 significant digits so a round trip through text reproduces the
// exact double.

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace effdiff {

struct EnsembleResult;
struct ConvergenceStudy;
struct EulerianSolution;

// %.16e rendering; parses back to the identical bit pattern.
std::string format_sci(double x);

// json with every double rendered via format_sci (nlohmann's dump would
// shorten to the minimal round-trip form, which downstream diffing of CSV
// against JSON would then miss).
std::string dump_json(const nlohmann::json& j, int indent = 2);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);

nlohmann::json ensemble_result_to_json(const EnsembleResult& result);
nlohmann::json eulerian_solution_to_json(const EulerianSolution& solution);
nlohmann::json convergence_study_to_json(const ConvergenceStudy& study);

// Convergence table, one row per (h, scheme) point:
// h,scheme,err_frobenius,err_entry_00,...,std_error,wallclock_seconds
std::string convergence_study_to_csv(const ConvergenceStudy& study);

// Flat matrix CSV with a header row of entry names (a_00, a_01, ...).
std::string matrix_to_csv(const std::string& prefix, const Eigen::MatrixXd& m);

// Grid field CSV: one row per node in flat order (axis 0 fastest), columns
// y_0..y_{d-1} for the node corner followed by one column per component.
struct TorusGridField;
std::string field_to_csv(const TorusGridField& field,
                         const std::vector<std::string>& value_names);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace effdiff
