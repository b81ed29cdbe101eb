#pragma once

#include "limes/problem.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace limes {

/// Serializable description of one application instance.
///
/// Matrices are nested arrays of rows or a CSV string; vectors are flat arrays
/// or a CSV string. Which fields are required depends on the application.
struct ProblemDocument {
  Application application = Application::pmc;
  std::optional<Matrix> a;        // design matrix (pmc, mc, orr, sorr, lad_ridge)
  std::optional<Vector> y;        // observations
  std::optional<Matrix> y_matrix; // spcp observation Y
  std::optional<Matrix> samples;  // classify
  std::optional<Vector> labels;   // classify
  double mu = 1.0;
  double gamma = 1.0;
  double sigma_x = 1.0;
  double sigma_eps = 1.0;
  double mu_l = 1.0;
  double mu_s = 1.0;
  double lambda = 1.0;

  LimesProblem build() const;
};

ProblemDocument problem_document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ProblemDocument& doc);
ProblemDocument load_problem_document(const std::filesystem::path& path);

/// Applies "key=value" overrides to a JSON object; values are parsed as JSON
/// when possible and kept as strings otherwise. Dotted keys address nested objects.
void apply_override(nlohmann::json& j, const std::string& assignment);

nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json vector_to_json(const Vector& v);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& field);
Vector vector_from_json(const nlohmann::json& j, const std::string& field);

}  // namespace limes
