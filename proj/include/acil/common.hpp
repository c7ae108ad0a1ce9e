#ifndef ACIL_COMMON_HPP
#define ACIL_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace acil {

using Scalar = double;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using SampleId = std::int64_t;
using ClassId = int;

/// Invalid configuration value; `key()` names the offending setting when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, std::string key = {})
      : std::runtime_error(msg), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed input file. Carries the 1-based line number when available.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input file that does not exist or cannot be opened.
class DatasetMissing : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (dimension mismatch, bad distribution, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, int epoch)
      : std::runtime_error(msg), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// CSV input whose header or rows do not match the results schema.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& msg, std::string column = {})
      : std::runtime_error(msg), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

}  // namespace acil

#endif  // ACIL_COMMON_HPP
