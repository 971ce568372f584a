#pragma once

#include <stdexcept>
#include <string>

namespace cellsense {

// Malformed or inconsistent input data (trace files, map files, scans).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A caller violated an operation's precondition.
class PreconditionError : public std::invalid_argument {
 public:
  explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace cellsense
