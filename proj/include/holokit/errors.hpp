#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace holokit {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a precondition (shape, unitarity, parameter range).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical kernel failed to produce a trustworthy result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An overlap (or other matrix) fell below the singularity tolerance.
/// Carries the offending step index when raised along a path.
class SingularOverlapError : public NumericalError {
 public:
  SingularOverlapError(double sigma_min, double tol,
                       std::optional<std::size_t> step = std::nullopt)
      : NumericalError(format(sigma_min, tol, step)),
        sigma_min_(sigma_min),
        step_(step) {}

  double sigma_min() const noexcept { return sigma_min_; }
  std::optional<std::size_t> step() const noexcept { return step_; }

 private:
  static std::string format(double sigma_min, double tol,
                            std::optional<std::size_t> step) {
    std::string msg = "ill-conditioned overlap";
    if (step) msg += " at step " + std::to_string(*step);
    msg += ": sigma_min = " + std::to_string(sigma_min) +
           " < tol = " + std::to_string(tol);
    return msg;
  }

  double sigma_min_;
  std::optional<std::size_t> step_;
};

/// Malformed input file; `record` is the zero-based matrix record index.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::optional<std::size_t> record)
      : Error(record ? "record " + std::to_string(*record) + ": " + what
                     : what),
        record_(record) {}

  std::optional<std::size_t> record() const noexcept { return record_; }

 private:
  std::optional<std::size_t> record_;
};

}  // namespace holokit
