#include "limes/problem_io.hpp"

#include "limes/csv.hpp"
#include "limes/errors.hpp"

#include <cmath>
#include <fstream>

namespace limes {

using nlohmann::json;

namespace {

double finite_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw InputError("field '" + field + "' must hold numbers");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw InputError("field '" + field + "' has a non-finite value");
  return x;
}

double scalar_field(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  return finite_number(j.at(key), key);
}

}  // namespace

Matrix matrix_from_json(const json& j, const std::string& field) {
  if (j.is_string()) return csv::parse_matrix(j.get<std::string>());
  if (!j.is_array() || j.empty()) throw InputError("field '" + field + "' must be a non-empty array");
  if (!j.front().is_array()) {
    // A flat array is read as a single column.
    Matrix m(static_cast<Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Index>(i), 0) = finite_number(j[i], field);
    return m;
  }
  const std::size_t cols = j.front().size();
  if (cols == 0) throw InputError("field '" + field + "' has an empty row");
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& row = j[i];
    if (!row.is_array() || row.size() != cols) {
      throw InputError("field '" + field + "': row " + std::to_string(i) + " has the wrong length");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Index>(i), static_cast<Index>(k)) = finite_number(row[k], field);
    }
  }
  return m;
}

Vector vector_from_json(const json& j, const std::string& field) {
  const Matrix m = matrix_from_json(j, field);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw InputError("field '" + field + "' must be a vector");
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

ProblemDocument problem_document_from_json(const json& j) {
  if (!j.is_object()) throw InputError("problem document must be a JSON object");
  if (!j.contains("application") || !j.at("application").is_string()) {
    throw InputError("problem document needs a string field 'application'");
  }
  ProblemDocument doc;
  doc.application = application_from_string(j.at("application").get<std::string>());
  if (doc.application == Application::generic) {
    throw InputError("generic problems cannot be described by a document");
  }
  if (j.contains("A")) doc.a = matrix_from_json(j.at("A"), "A");
  if (j.contains("y")) doc.y = vector_from_json(j.at("y"), "y");
  if (j.contains("Y")) doc.y_matrix = matrix_from_json(j.at("Y"), "Y");
  if (j.contains("samples")) doc.samples = matrix_from_json(j.at("samples"), "samples");
  if (j.contains("labels")) doc.labels = vector_from_json(j.at("labels"), "labels");
  doc.mu = scalar_field(j, "mu", doc.mu);
  doc.gamma = scalar_field(j, "gamma", doc.gamma);
  doc.sigma_x = scalar_field(j, "sigma_x", doc.sigma_x);
  doc.sigma_eps = scalar_field(j, "sigma_eps", doc.sigma_eps);
  doc.mu_l = scalar_field(j, "mu_L", doc.mu_l);
  doc.mu_s = scalar_field(j, "mu_S", doc.mu_s);
  doc.lambda = scalar_field(j, "lambda", doc.lambda);
  return doc;
}

json to_json(const ProblemDocument& doc) {
  json j;
  j["application"] = to_string(doc.application);
  if (doc.a) j["A"] = matrix_to_json(*doc.a);
  if (doc.y) j["y"] = vector_to_json(*doc.y);
  if (doc.y_matrix) j["Y"] = matrix_to_json(*doc.y_matrix);
  if (doc.samples) j["samples"] = matrix_to_json(*doc.samples);
  if (doc.labels) j["labels"] = vector_to_json(*doc.labels);
  j["mu"] = doc.mu;
  j["gamma"] = doc.gamma;
  j["sigma_x"] = doc.sigma_x;
  j["sigma_eps"] = doc.sigma_eps;
  j["mu_L"] = doc.mu_l;
  j["mu_S"] = doc.mu_s;
  j["lambda"] = doc.lambda;
  return j;
}

LimesProblem ProblemDocument::build() const {
  auto need_regression = [&](const char* app) {
    if (!a || !y) throw InputError(std::string(app) + " problems need fields 'A' and 'y'");
  };
  switch (application) {
    case Application::pmc:
      need_regression("pmc");
      return make_pmc(*a, *y, mu, gamma);
    case Application::mc:
      need_regression("mc");
      return make_mc(*a, *y, mu, gamma);
    case Application::orr:
      need_regression("orr");
      return make_orr(*a, *y, mu, gamma);
    case Application::sorr:
      need_regression("sorr");
      return make_sorr(*a, *y, sigma_x, sigma_eps, mu, gamma);
    case Application::lad_ridge:
      need_regression("lad_ridge");
      return make_lad_ridge(*a, *y, lambda);
    case Application::spcp:
      if (!y_matrix) throw InputError("spcp problems need field 'Y'");
      return make_spcp(*y_matrix, mu_l, mu_s, gamma);
    case Application::classify:
      if (!samples || !labels) throw InputError("classify problems need 'samples' and 'labels'");
      return make_classify(*samples, *labels, mu, gamma);
    case Application::generic:
      break;
  }
  throw InputError("unsupported application");
}

ProblemDocument load_problem_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return problem_document_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override key '" + key + "' crosses a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace limes
