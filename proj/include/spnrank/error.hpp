#pragma once

#include <stdexcept>
#include <string>

namespace spnrank {

// Base of every exception thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or configuration (exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed files, dimension mismatches, empty inputs (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// A model or graph broke one of its invariants (exit code 3).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace spnrank
