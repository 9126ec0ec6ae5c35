#pragma once

#include <stdexcept>
#include <string>

namespace conic {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGeometry : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Spectrum file problems; carries the 1-based line number (0 for whole-file errors).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Evaluation at a point where the kernel is singular (z = 0 for K_nu, p = p' for the resolvent).
class SingularityError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

/// A mode sum ran out of modes (or iterations) before reaching its tolerance.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, double last_term)
      : Error(what + " (last term magnitude " + std::to_string(last_term) + ")"),
        last_term_(last_term) {}
  double last_term() const noexcept { return last_term_; }

 private:
  double last_term_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Pole of a meromorphic function. `order` is the pole order, `residue` the
/// leading Laurent coefficient when known.
class PoleError : public Error {
 public:
  PoleError(const std::string& what, int order, double residue)
      : Error(what), order_(order), residue_(residue) {}
  int order() const noexcept { return order_; }
  double residue() const noexcept { return residue_; }

 private:
  int order_;
  double residue_;
};

class ConditioningError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Contract violation on a contour specification (e.g. phi outside (pi/2, pi)).
class ContourError : public Error {
 public:
  using Error::Error;
};

class UndefinedDeterminant : public Error {
 public:
  UndefinedDeterminant(const std::string& what, double residue) : Error(what), residue_(residue) {}
  double residue() const noexcept { return residue_; }

 private:
  double residue_;
};

}  // namespace conic
