#pragma once

#include <stdexcept>
#include <string>

namespace refnet {

// Error taxonomy used across the library. The CLI maps these onto exit codes:
// ConfigError/UsageError -> 1, DataError/ParseError -> 2, NumericError -> 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : DataError {
  using DataError::DataError;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace refnet
