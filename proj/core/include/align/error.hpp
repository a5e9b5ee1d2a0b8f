#pragma once

#include <stdexcept>
#include <string>

namespace align {

/// Base class for every error raised by the library. Messages are stable
/// strings that callers and tests match on.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A referenced entity (task, run, document) does not exist.
class NotFound : public Error {
public:
  using Error::Error;
};

/// A state transition lost a race or is not permitted.
class Conflict : public Error {
public:
  using Error::Error;
};

/// Malformed input file or record.
class ParseError : public Error {
public:
  using Error::Error;
};

/// A numeric procedure produced a non-finite value.
class Diverged : public Error {
public:
  Diverged(const std::string& what, int step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

/// A generation/search/judge backend failed.
class BackendError : public Error {
public:
  using Error::Error;
};

}  // namespace align
