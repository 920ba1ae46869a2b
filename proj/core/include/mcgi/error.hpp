#pragma once

#include <stdexcept>
#include <string>

namespace mcgi {

// Every failure raised by the library derives from Error so callers can catch
// one type at the boundary (the CLI does exactly that).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: violated preconditions, out-of-range flags, shape mismatches.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Malformed vector files (fvecs/bvecs/ivecs).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Malformed index or profile files: bad magic, version, truncation, checksum.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Inputs that are well-formed but geometrically degenerate (coincident
// points, zero-variance neighborhoods, zero population spread).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace mcgi
