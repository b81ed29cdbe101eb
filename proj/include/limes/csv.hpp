#pragma once

#include "limes/linop.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace limes::csv {

// One matrix row per line, comma separated, no header. Vectors are written as
// a single column.

Matrix read_matrix(std::istream& in);
Matrix read_matrix(const std::filesystem::path& path);
Matrix parse_matrix(const std::string& text);

/// Accepts a single column or a single row.
Vector read_vector(const std::filesystem::path& path);
Vector parse_vector(const std::string& text);

void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix(const std::filesystem::path& path, const Matrix& m);
void write_vector(std::ostream& out, const Vector& v);
void write_vector(const std::filesystem::path& path, const Vector& v);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace limes::csv
