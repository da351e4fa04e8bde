#pragma once

#include <stdexcept>
#include <string>

namespace gossipkf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A structural invariant of an input (model, topology, plan, config) is violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A scenario file could not be parsed; carries the offending line.
class ParseError : public ValidationError {
 public:
  ParseError(int line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// An iteration diverged or failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// No power-feasible link selection yields a bounded steady-state covariance.
class UnschedulableError : public NumericalError {
 public:
  UnschedulableError(int node, const std::string& what)
      : NumericalError("node " + std::to_string(node + 1) + " unschedulable: " + what), node_(node) {}

  /// Zero-based index of the node.
  int node() const noexcept { return node_; }

 private:
  int node_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gossipkf
