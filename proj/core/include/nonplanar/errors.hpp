#pragma once

#include <stdexcept>
#include <string>

namespace nonplanar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chart is not regular at the query point (tangents nearly parallel or
/// a fundamental-form matrix is singular).
class RegularityError : public Error {
 public:
  using Error::Error;
};

/// The closed-form pose Jacobian was requested on a chart whose tangents are
/// not orthogonal.
class NonOrthogonalError : public Error {
 public:
  using Error::Error;
};

/// A query left the declared parameter domain of a road or a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Forward-mode differentiation hit a primitive singularity (e.g. 1/0).
class NonDifferentiablePoint : public Error {
 public:
  using Error::Error;
};

/// The equality system of a QP is inconsistent.
class InfeasibleQp : public Error {
 public:
  using Error::Error;
};

/// Simulated state left the road domain or became non-finite.
class SimulationDiverged : public Error {
 public:
  SimulationDiverged(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Malformed road or scenario file. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& message)
      : Error(format(file, line, message)), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, int line, const std::string& message) {
    std::string out = file;
    if (line > 0) out += ":" + std::to_string(line);
    return out + ": " + message;
  }

  std::string file_;
  int line_;
};

}  // namespace nonplanar
