#pragma once

#include <stdexcept>
#include <string>

namespace svft {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

/// Raised by the Jacobi SVD when the sweep limit is hit.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A requested trainable budget cannot be realized.
class BudgetError : public Error {
 public:
  using Error::Error;
};

class UnsupportedShapeError : public Error {
 public:
  using Error::Error;
};

/// Preconditions of the structure check (separated spectrum) do not hold.
class SpectrumDegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Loss became non-finite or blew past the divergence threshold.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Adapter file was produced against a different base matrix.
class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace svft
