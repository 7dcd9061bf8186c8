#pragma once

#include <stdexcept>
#include <string>

namespace rfsnn {

/// Argument outside the physical or mathematical domain of a model.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid geometry, topology or configuration key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed dataset or checkpoint bytes.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint written by an incompatible format version.
class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Non-finite values met during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rfsnn
