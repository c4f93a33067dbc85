#pragma once

#include <stdexcept>
#include <string>

namespace pilotwave {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed mode tables, inconsistent grid/cell sizes, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Numerical failures. The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// |psi|^2 fell below the node floor where the guidance velocity was needed.
class NodeSingularity : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularField : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FallbackUnavailable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace pilotwave
