#ifndef SMOLHOM_ERRORS_HPP_
#define SMOLHOM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace smolhom {

// Error taxonomy maps onto CLI exit codes: config 2, solver 3, invariant 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MeshError : std::runtime_error {
  explicit MeshError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace smolhom

#endif  // SMOLHOM_ERRORS_HPP_
