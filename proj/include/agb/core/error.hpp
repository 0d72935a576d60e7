#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace agb {

/// Bad input data: malformed files, failed geometry checks, out-of-domain
/// arguments. The CLI maps this family to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class GeometryError : public DataError {
 public:
  using DataError::DataError;
};

class PlacementError : public DataError {
 public:
  using DataError::DataError;
};

class RangeError : public DataError {
 public:
  using DataError::DataError;
};

class ClassificationError : public DataError {
 public:
  using DataError::DataError;
};

class PairingError : public DataError {
 public:
  PairingError(const std::string& what, std::vector<std::int64_t> orphans)
      : DataError(what), orphans_(std::move(orphans)) {}
  const std::vector<std::int64_t>& orphans() const noexcept { return orphans_; }

 private:
  std::vector<std::int64_t> orphans_;
};

/// Numeric failure during fitting or evaluation. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, int epoch)
      : NumericError(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double max_violation)
      : NumericError(what), max_violation_(max_violation) {}
  double max_violation() const noexcept { return max_violation_; }

 private:
  double max_violation_;
};

class UndefinedMetricError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Bad command line or configuration. CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace agb
