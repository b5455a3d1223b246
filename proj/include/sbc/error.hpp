#pragma once

#include <stdexcept>
#include <string>

namespace sbc {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition (bad sizes, bad parameters).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class GeometryError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Diffusion sample below the ellipticity constant, or not symmetric.
class EllipticityError : public Error {
 public:
  using Error::Error;
};

/// Weight evaluation requested at t = 0 or t = T.
class SingularWeightError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// The implicit step matrix could not be factorized.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `field()` names the offending key.
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, const std::string& message)
      : InvalidArgument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace sbc
