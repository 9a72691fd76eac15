#pragma once

#include <stdexcept>
#include <string>

namespace uqgroup {

/// Argument outside the mathematical domain of an operation (bad level/index
/// pair, dimension mismatch, non-positive diagonal, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Required sample data was not supplied.
class IncompleteDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or invalid run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or eigensolver failure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uqgroup
