#pragma once

#include <stdexcept>
#include <string>

namespace wigp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments of inconsistent sizes or out-of-domain values.
class InvalidArgument : public Error {
  public:
    using Error::Error;
};

/// A kernel leaf reads a channel the input point does not carry.
class MissingChannel : public Error {
  public:
    using Error::Error;
};

/// Kernel expression text could not be parsed. `position()` is a 0-based
/// byte offset into the source string.
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}

    std::size_t position() const { return position_; }

  private:
    std::size_t position_;
};

/// Cholesky failed at every jitter level.
class NotPositiveDefinite : public Error {
  public:
    using Error::Error;
};

/// Malformed or missing input data (CSV, model files, config files).
class DataError : public Error {
  public:
    using Error::Error;
};

/// Every optimizer restart ended in a numerical failure.
class AllRestartsFailed : public Error {
  public:
    using Error::Error;
};

/// Every instance of a benchmark variant failed.
class BenchmarkFailed : public Error {
  public:
    using Error::Error;
};

}  // namespace wigp
