#pragma once

#include <stdexcept>
#include <string>

namespace listrecon {

/// Error taxonomy for the toolkit.  Each exception class corresponds to a
/// stable status code exposed through the C API (and to a CLI exit code),
/// so core code should throw the most specific type that applies.
enum class ErrorCode : int {
  ok = 0,
  generic = 1,
  bad_config = 2,
  io_error = 3,
  hash_mismatch = 4,
  bad_dimension = 5,
  empty_data = 6,
  numeric_error = 7,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

struct InvalidConfigError : Error {
  explicit InvalidConfigError(const std::string& what)
      : Error(ErrorCode::bad_config, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::io_error, what) {}
};

struct HashMismatchError : Error {
  explicit HashMismatchError(const std::string& what)
      : Error(ErrorCode::hash_mismatch, what) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& what)
      : Error(ErrorCode::bad_dimension, what) {}
};

struct EmptyDataError : Error {
  explicit EmptyDataError(const std::string& what)
      : Error(ErrorCode::empty_data, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what)
      : Error(ErrorCode::numeric_error, what) {}
};

}  // namespace listrecon
