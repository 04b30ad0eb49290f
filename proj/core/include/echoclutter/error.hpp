#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace echoclutter {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad magic, version or dtype in a binary container.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Payload shorter or longer than the header promises.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or out-of-[0,1] intensity.
class RangeError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation precondition (missing gradient, empty split, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Every SSIM patch was excluded, so the index is undefined.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class MissingPredictionError : public Error {
 public:
  MissingPredictionError(std::string message, std::vector<std::string> missing)
      : Error(std::move(message)), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

}  // namespace echoclutter
