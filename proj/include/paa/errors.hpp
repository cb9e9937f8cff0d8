#pragma once

#include <stdexcept>
#include <string>

namespace paa {

// Every library error carries a stable, machine-parseable class name so the
// CLI can report it on a single line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape_error", what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract_error", what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error("numerical_error", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& what) : Error("generation_error", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace paa
