#pragma once

#include <stdexcept>
#include <string>

namespace levdec {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Parallel files with mismatched line counts, or mismatched list lengths.
class AlignmentError : public Error {
public:
  using Error::Error;
};

// Malformed input data (bad UTF-8, unreadable file, bad model file).
class FormatError : public Error {
public:
  using Error::Error;
};

// An API precondition was violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
};

// A minimal edit script needs more insertions at one gap than the
// placeholder head can express.
class ScriptOverflowError : public Error {
public:
  using Error::Error;
};

// Regression design matrix is singular (all source lengths equal).
class DegenerateDesignError : public Error {
public:
  using Error::Error;
};

}  // namespace levdec
