#pragma once

#include <stdexcept>
#include <string>

namespace fofewsd {

// Base for every error the library raises. The CLI maps the three leaf
// categories onto its exit codes (1 usage, 2 data, 3 numerical).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied argument or configuration value violates a precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input files or in-memory data do not satisfy their format or invariants.
class DataError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline std::string with_line(const std::string& what, std::size_t line_no) {
  return what + " (line " + std::to_string(line_no) + ")";
}

}  // namespace fofewsd
