#pragma once

#include <stdexcept>
#include <string>

namespace hybridscreen {

/// Invalid or incomplete run configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, inconsistent or insufficient input data. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A threshold selected no features. Searches record the trial as skipped.
class EmptySelection : public DataError {
 public:
  using DataError::DataError;
};

/// Every trial of a search was skipped. CLI exit code 4.
class SearchDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hybridscreen
