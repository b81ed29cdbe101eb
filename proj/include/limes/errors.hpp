#pragma once

#include <stdexcept>
#include <string>

namespace limes {

/// Bad dimensions, out-of-range parameters, malformed files.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Solver configuration outside the admissible range (step sizes, tolerances).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// The smooth part of the objective is not convex and no override was given.
class ConvexityError : public std::runtime_error {
 public:
  explicit ConvexityError(const std::string& what) : std::runtime_error(what) {}
};

/// Iteration caps hit, non-finite values, degenerate spectra.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace limes
