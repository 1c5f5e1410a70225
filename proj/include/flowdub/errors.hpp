#pragma once

#include <stdexcept>
#include <string>

namespace flowdub {

// Base of every error raised by the library. The CLI maps each subclass onto
// a stable exit code (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched grid dimensions or lengths.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of an operation (t outside [0,1], zero
// durations, negative weights, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input violates an operation precondition (e.g. corrupting a masked target).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Observed state has zero probability under the target law.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A denoiser produced rows that are not probability distributions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowdub
