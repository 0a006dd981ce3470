#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bsr {

/// Invalid configuration (bad grid size, m+1 > N, malformed config file).
/// The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Numerical failure: non-convergence or a singular system. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Cholesky breakdown. Carries the offending pivot.
class NotSpdError : public NumericalError {
 public:
  NotSpdError(std::size_t index, double pivot)
      : NumericalError("matrix is not positive definite: pivot " + std::to_string(index) +
                       " = " + std::to_string(pivot)),
        index_(index),
        pivot_(pivot) {}

  std::size_t pivot_index() const noexcept { return index_; }
  double pivot_value() const noexcept { return pivot_; }

 private:
  std::size_t index_;
  double pivot_;
};

/// File could not be opened, written or parsed. Carries the path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace bsr
