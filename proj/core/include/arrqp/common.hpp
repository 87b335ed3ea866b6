#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace arrqp {

// Row-major so that binary dumps and row slices (one entity per row) are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Side { User, Service };

const char* to_string(Side side);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (ragged rows, bad header, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A numeric token could not be parsed; carries the 1-based line number.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : FormatError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class RoutingError : public Error {
 public:
  using Error::Error;
};

/// Metric over an empty set, improvement against a zero baseline, ...
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// SplitMix64 finalizer; used to derive independent child seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Warnings go through a process-wide sink (stderr by default) so the CLI can silence them.
using WarningSink = void (*)(const std::string&);
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace arrqp
