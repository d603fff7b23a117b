#pragma once

#include <stdexcept>
#include <string>

namespace mtdml {

// Configuration / parameter problems map to CLI exit code 2,
// everything else data-related maps to exit code 3.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParameterError : std::runtime_error {
  explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValueError : std::runtime_error {
  explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidityError : std::runtime_error {
  explicit ValidityError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StaleArtifactError : std::runtime_error {
  explicit StaleArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mtdml
